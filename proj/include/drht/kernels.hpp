#pragma once

// Raw compute kernels behind the differentiable ops.
//
// Two implementations exist for the convolution family: the production path
// (im2col + packed GEMM, OpenMP-parallel over output tiles) and a serial
// direct-loop reference in `kernels::reference` used by the tests and the
// benchmark. Parallel work is only ever split across output elements, never
// across a reduction, so results are bit-identical for any thread count.

#include <cstddef>

#include "drht/tensor.hpp"

namespace drht::kernels {

enum class Transpose { No, Yes };

/// C = op(A) * op(B), or C += op(A) * op(B) when `accumulate` is set.
/// Row-major; op(A) is m x k, op(B) is k x n.
template <typename T>
void gemm(Transpose trans_a, Transpose trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
          bool accumulate);

/// Geometry of a "same"-padded strided cross-correlation.
struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;

  std::size_t patch_size() const { return in_channels * kernel_h * kernel_w; }
  std::size_t in_pixels() const { return in_h * in_w; }
  std::size_t out_pixels() const { return out_h * out_w; }
  Shape input_shape() const { return {batch, in_channels, in_h, in_w}; }
  Shape output_shape() const { return {batch, out_channels, out_h, out_w}; }
  Shape weight_shape() const { return {out_channels, in_channels, kernel_h, kernel_w}; }
};

/// Geometry for conv2d(input[N,Cin,H,W], weight[Cout,Cin,kH,kW]).
/// Throws ShapeError on channel mismatch, even kernels or unsupported stride.
ConvGeometry conv_geometry(const Shape& input, const Shape& weight, std::size_t stride);

/// Geometry of the convolution whose adjoint is
/// conv2d_transpose(input[N,Cin,H,W], weight[Cin,Cout,kH,kW]); its input
/// side is the transposed op's output (H*stride x W*stride).
ConvGeometry transpose_conv_geometry(const Shape& input, const Shape& weight, std::size_t stride);

/// y = conv(x, w) + bias. `bias` may be null.
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);

/// dx += conv^T(dy, w). Also the forward pass of conv2d_transpose.
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx);

/// dw += dL/dw, db += dL/db (db may be null).
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw, T* db);

/// y[n,c,:,:] += bias[c]
template <typename T>
void add_channel_bias(std::size_t batch, std::size_t channels, std::size_t pixels, const T* bias, T* y);

/// db[c] += sum over n, pixels of dy[n,c,:]
template <typename T>
void accumulate_channel_sum(std::size_t batch, std::size_t channels, std::size_t pixels, const T* dy,
                            T* db);

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx);

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw, T* db);

}  // namespace reference

}  // namespace drht::kernels
