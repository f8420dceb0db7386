#include <algorithm>
#include <vector>

#include "drht/kernels.hpp"
#include "gemm_impl.hpp"

namespace drht::kernels {

namespace {

void check_kernel(std::size_t kh, std::size_t kw, std::size_t stride) {
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ShapeError("conv kernel sizes must be odd, got " + std::to_string(kh) + "x" + std::to_string(kw));
  }
  if (stride != 1 && stride != 2) throw ShapeError("conv stride must be 1 or 2, got " + std::to_string(stride));
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t pad, std::size_t stride) {
  return (in + 2 * pad - k) / stride + 1;
}

// Gathers im2col rows [k0, k0+kc) x output pixels [col0, col0+cols) of one image
// into a GEMM panel: B(row, pixel) = x[c][oy*s + i - pad][ox*s + j - pad], row = (c*kh + i)*kw + j.
template <typename T>
struct PatchPacker {
  const ConvGeometry& g;
  const T* x;

  void operator()(std::size_t k0, std::size_t kc, std::size_t col0, std::size_t cols, T* dst) const {
    constexpr std::size_t NR = detail::Tile<T>::kNR;
    const std::size_t oy0 = col0 / g.out_w, ox0 = col0 % g.out_w;
    for (std::size_t p = 0; p < kc; ++p) {
      const std::size_t row = k0 + p;
      const std::size_t j = row % g.kernel_w;
      const std::size_t i = (row / g.kernel_w) % g.kernel_h;
      const std::size_t c = row / (g.kernel_w * g.kernel_h);
      const T* xc = x + c * g.in_pixels();
      T* d = dst + p * NR;
      // Walk output rows in runs; within a run only the in-bounds span is copied.
      std::size_t oy = oy0, ox = ox0, q = 0;
      while (q < cols) {
        const std::size_t run = std::min(cols - q, g.out_w - ox);
        const long iy = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad_h);
        if (iy >= 0 && iy < static_cast<long>(g.in_h)) {
          const T* xrow = xc + static_cast<std::size_t>(iy) * g.in_w;
          // ix = ox*s + j - pad must lie in [0, in_w).
          const long base = static_cast<long>(j) - static_cast<long>(g.pad_w);
          const long s = static_cast<long>(g.stride);
          long lo = base >= 0 ? 0 : (-base + s - 1) / s;
          long hi = (static_cast<long>(g.in_w) - 1 - base) / s + 1;
          lo = std::max(lo, static_cast<long>(ox));
          hi = std::min(hi, static_cast<long>(ox + run));
          if (g.stride == 1) {
            for (long o = lo; o < hi; ++o) d[q + (o - static_cast<long>(ox))] = xrow[o + base];
          } else {
            for (long o = lo; o < hi; ++o) d[q + (o - static_cast<long>(ox))] = xrow[o * s + base];
          }
        }
        q += run;
        ox += run;
        if (ox == g.out_w) {
          ox = 0;
          ++oy;
        }
      }
    }
  }
};

// Transposed gather for the weight gradient: B(pixel, row) over pixels [k0, k0+kc)
// and im2col rows [col0, col0+cols).
template <typename T>
struct TransposedPatchPacker {
  const ConvGeometry& g;
  const T* x;

  void operator()(std::size_t k0, std::size_t kc, std::size_t col0, std::size_t cols, T* dst) const {
    constexpr std::size_t NR = detail::Tile<T>::kNR;
    const long s = static_cast<long>(g.stride);
    for (std::size_t q = 0; q < cols; ++q) {
      const std::size_t row = col0 + q;
      const std::size_t j = row % g.kernel_w;
      const std::size_t i = (row / g.kernel_w) % g.kernel_h;
      const T* xc = x + (row / (g.kernel_w * g.kernel_h)) * g.in_pixels();
      const long base = static_cast<long>(j) - static_cast<long>(g.pad_w);
      const long lo_all = base >= 0 ? 0 : (-base + s - 1) / s;
      const long hi_all = (static_cast<long>(g.in_w) - 1 - base) / s + 1;
      std::size_t oy = k0 / g.out_w, ox = k0 % g.out_w, p = 0;
      while (p < kc) {
        const std::size_t run = std::min(kc - p, g.out_w - ox);
        const long iy = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad_h);
        if (iy >= 0 && iy < static_cast<long>(g.in_h)) {
          const T* xrow = xc + static_cast<std::size_t>(iy) * g.in_w;
          const long lo = std::max(lo_all, static_cast<long>(ox));
          const long hi = std::min(hi_all, static_cast<long>(ox + run));
          T* d = dst + p * NR + q;
          for (long o = lo; o < hi; ++o) d[(o - static_cast<long>(ox)) * static_cast<long>(NR)] = xrow[o * s + base];
        }
        p += run;
        ox += run;
        if (ox == g.out_w) {
          ox = 0;
          ++oy;
        }
      }
    }
  }
};

// Scatter-add of an im2col block covering output rows [oy_begin, oy_end).
// Each input channel is owned by one thread.
template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, std::size_t oy_begin, std::size_t oy_end, T* dx) {
  const std::size_t pixels = (oy_end - oy_begin) * g.out_w;
  const std::size_t taps = g.kernel_h * g.kernel_w;
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    T* dxc = dx + c * g.in_pixels();
    for (std::size_t tap = 0; tap < taps; ++tap) {
      const std::size_t i = tap / g.kernel_w;
      const std::size_t j = tap % g.kernel_w;
      const T* src = col + (c * taps + tap) * pixels;
      for (std::size_t oy = oy_begin; oy < oy_end; ++oy) {
        const long iy = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad_h);
        if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
        T* dxrow = dxc + static_cast<std::size_t>(iy) * g.in_w;
        const T* srow = src + (oy - oy_begin) * g.out_w;
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const long ix = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad_w);
          if (ix >= 0 && ix < static_cast<long>(g.in_w)) dxrow[ix] += srow[ox];
        }
      }
    }
  }
}

// Below this many input channels the flipped-kernel GEMM has too few rows to
// amortize patch packing, and banded col2im is faster.
constexpr std::size_t kMinFlippedChannels = 16;

bool is_pointwise(const ConvGeometry& g) { return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1; }

// Kernel of the adjoint stride-1 conv: spatially flipped, channels swapped.
template <typename T>
std::vector<T> flip_transpose(const ConvGeometry& g, const T* w) {
  const std::size_t kh = g.kernel_h, kw = g.kernel_w;
  std::vector<T> flipped(g.out_channels * g.patch_size());
  for (std::size_t co = 0; co < g.out_channels; ++co)
    for (std::size_t ci = 0; ci < g.in_channels; ++ci)
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j) {
          flipped[((ci * g.out_channels + co) * kh + (kh - 1 - i)) * kw + (kw - 1 - j)] =
              w[((co * g.in_channels + ci) * kh + i) * kw + j];
        }
  return flipped;
}

ConvGeometry adjoint_geometry(const ConvGeometry& g) {
  ConvGeometry adj = g;
  adj.in_channels = g.out_channels;
  adj.out_channels = g.in_channels;
  adj.in_h = g.out_h;
  adj.in_w = g.out_w;
  adj.out_h = g.in_h;
  adj.out_w = g.in_w;
  return adj;
}

}  // namespace

ConvGeometry conv_geometry(const Shape& input, const Shape& weight, std::size_t stride) {
  if (input.size() != 4 || weight.size() != 4) {
    throw ShapeError("conv2d expects NCHW input and OIHW weight, got " + to_string(input) + " and " +
                     to_string(weight));
  }
  if (input[1] != weight[1]) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(input) + " has " + std::to_string(input[1]) +
                     " channels but weight " + to_string(weight) + " expects " + std::to_string(weight[1]));
  }
  check_kernel(weight[2], weight[3], stride);
  ConvGeometry g;
  g.batch = input[0];
  g.in_channels = input[1];
  g.in_h = input[2];
  g.in_w = input[3];
  g.out_channels = weight[0];
  g.kernel_h = weight[2];
  g.kernel_w = weight[3];
  g.stride = stride;
  g.pad_h = g.kernel_h / 2;
  g.pad_w = g.kernel_w / 2;
  g.out_h = conv_out(g.in_h, g.kernel_h, g.pad_h, stride);
  g.out_w = conv_out(g.in_w, g.kernel_w, g.pad_w, stride);
  return g;
}

ConvGeometry transpose_conv_geometry(const Shape& input, const Shape& weight, std::size_t stride) {
  if (input.size() != 4 || weight.size() != 4) {
    throw ShapeError("conv2d_transpose expects NCHW input and IOHW weight, got " + to_string(input) + " and " +
                     to_string(weight));
  }
  if (input[1] != weight[0]) {
    throw ShapeError("conv2d_transpose channel mismatch: input " + to_string(input) + " has " +
                     std::to_string(input[1]) + " channels but weight " + to_string(weight) + " expects " +
                     std::to_string(weight[0]));
  }
  check_kernel(weight[2], weight[3], stride);
  ConvGeometry g;
  g.batch = input[0];
  g.out_channels = weight[0];
  g.in_channels = weight[1];
  g.kernel_h = weight[2];
  g.kernel_w = weight[3];
  g.stride = stride;
  g.pad_h = g.kernel_h / 2;
  g.pad_w = g.kernel_w / 2;
  g.in_h = input[2] * stride;
  g.in_w = input[3] * stride;
  g.out_h = conv_out(g.in_h, g.kernel_h, g.pad_h, stride);
  g.out_w = conv_out(g.in_w, g.kernel_w, g.pad_w, stride);
  if (g.out_h != input[2] || g.out_w != input[3]) {
    throw ShapeError("conv2d_transpose: input " + to_string(input) + " cannot be upsampled exactly by stride " +
                     std::to_string(stride));
  }
  return g;
}

template <typename T>
void add_channel_bias(std::size_t batch, std::size_t channels, std::size_t pixels, const T* bias, T* y) {
#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      T* row = y + (n * channels + c) * pixels;
      const T b = bias[c];
      for (std::size_t p = 0; p < pixels; ++p) row[p] += b;
    }
  }
}

template <typename T>
void accumulate_channel_sum(std::size_t batch, std::size_t channels, std::size_t pixels, const T* dy, T* db) {
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    T acc{0};
    for (std::size_t n = 0; n < batch; ++n) {
      const T* row = dy + (n * channels + c) * pixels;
      for (std::size_t p = 0; p < pixels; ++p) acc += row[p];
    }
    db[c] += acc;
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t K = g.patch_size();
  const std::size_t P = g.out_pixels();
  if (g.stride == 1 && !is_pointwise(g) && g.out_channels < kMinFlippedChannels &&
      g.in_channels >= kMinFlippedChannels) {
    // Few output rows starve the GEMM; run it as the adjoint of the flipped conv,
    // whose banded col2im path has a tall GEMM instead.
    const std::vector<T> flipped = flip_transpose(g, w);
    std::fill_n(y, g.batch * g.out_channels * P, T{0});
    conv2d_backward_input(adjoint_geometry(g), x, flipped.data(), y);
    if (bias) add_channel_bias(g.batch, g.out_channels, P, bias, y);
    return;
  }
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x + n * g.in_channels * g.in_pixels();
    T* yn = y + n * g.out_channels * P;
    if (is_pointwise(g)) {
      gemm(Transpose::No, Transpose::No, g.out_channels, P, K, w, K, xn, P, yn, P, false);
    } else {
      detail::gemm_packed(Transpose::No, g.out_channels, P, K, w, K, PatchPacker<T>{g, xn}, yn, P, false);
    }
  }
  if (bias) add_channel_bias(g.batch, g.out_channels, P, bias, y);
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx) {
  const std::size_t K = g.patch_size();
  const std::size_t P = g.out_pixels();

  if (g.stride == 1 && g.in_channels >= kMinFlippedChannels) {
    // A stride-1 "same" conv's adjoint is a conv of dy with the spatially
    // flipped, channel-transposed kernel over identical padding.
    const std::vector<T> flipped = flip_transpose(g, w);
    const ConvGeometry adj = adjoint_geometry(g);
    const std::size_t K_adj = adj.patch_size();
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* dyn = dy + n * g.out_channels * P;
      T* dxn = dx + n * g.in_channels * g.in_pixels();
      if (is_pointwise(g)) {
        gemm(Transpose::No, Transpose::No, g.in_channels, P, K_adj, flipped.data(), K_adj, dyn, P, dxn, P, true);
      } else {
        detail::gemm_packed(Transpose::No, adj.out_channels, adj.out_pixels(), K_adj, flipped.data(), K_adj,
                            PatchPacker<T>{adj, dyn}, dxn, adj.out_pixels(), true);
      }
    }
    return;
  }

  // Otherwise materialize im2col gradients a band of output rows at a time.
  constexpr std::size_t kBandElements = std::size_t{1} << 20;
  const std::size_t band_rows = std::clamp<std::size_t>(kBandElements / (K * g.out_w), 1, g.out_h);
  std::vector<T> dcol(K * band_rows * g.out_w);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* dyn = dy + n * g.out_channels * P;
    T* dxn = dx + n * g.in_channels * g.in_pixels();
    for (std::size_t oy0 = 0; oy0 < g.out_h; oy0 += band_rows) {
      const std::size_t oy1 = std::min(g.out_h, oy0 + band_rows);
      const std::size_t cols = (oy1 - oy0) * g.out_w;
      gemm(Transpose::Yes, Transpose::No, K, cols, g.out_channels, w, K, dyn + oy0 * g.out_w, P, dcol.data(), cols,
           false);
      col2im_add(g, dcol.data(), oy0, oy1, dxn);
    }
  }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw, T* db) {
  const std::size_t K = g.patch_size();
  const std::size_t P = g.out_pixels();
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x + n * g.in_channels * g.in_pixels();
    const T* dyn = dy + n * g.out_channels * P;
    if (is_pointwise(g)) {
      gemm(Transpose::No, Transpose::Yes, g.out_channels, K, P, dyn, P, xn, P, dw, K, true);
    } else {
      detail::gemm_packed(Transpose::No, g.out_channels, K, P, dyn, P, TransposedPatchPacker<T>{g, xn}, dw, K, true);
    }
  }
  if (db) accumulate_channel_sum(g.batch, g.out_channels, P, dy, db);
}

#define DRHT_INSTANTIATE(T)                                                                              \
  template void conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);               \
  template void conv2d_backward_input<T>(const ConvGeometry&, const T*, const T*, T*);                  \
  template void conv2d_backward_weight<T>(const ConvGeometry&, const T*, const T*, T*, T*);             \
  template void add_channel_bias<T>(std::size_t, std::size_t, std::size_t, const T*, T*);               \
  template void accumulate_channel_sum<T>(std::size_t, std::size_t, std::size_t, const T*, T*);
DRHT_INSTANTIATE(float)
DRHT_INSTANTIATE(double)
#undef DRHT_INSTANTIATE

}  // namespace drht::kernels
