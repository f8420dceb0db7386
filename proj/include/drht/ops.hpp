#pragma once

// Differentiable operations recorded on a Tape. Each op is a pure function of
// its operands; batchnorm additionally updates the caller's running statistics
// in training mode.

#include <cstddef>

#include "drht/autograd.hpp"

namespace drht {

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.99;
inline constexpr double kEluAlpha = 1.0;

/// Cross-correlation with zero "same" padding floor(k/2). bias is [Cout].
template <typename T>
Var<T> conv2d(Var<T> input, Var<T> weight, Var<T> bias, std::size_t stride);

/// Adjoint of conv2d: weight is [Cin, Cout, kH, kW], output is stride x larger.
template <typename T>
Var<T> conv2d_transpose(Var<T> input, Var<T> weight, Var<T> bias, std::size_t stride);

template <typename T>
Var<T> elu(Var<T> input);

enum class BatchNormMode { Train, Infer };

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

/// Per-channel normalization over (N, H, W). Train mode normalizes with the
/// biased batch variance and folds the batch statistics into `state`.
template <typename T>
Var<T> batchnorm(Var<T> input, Var<T> gamma, Var<T> beta, BatchNormState<T>& state, BatchNormMode mode);

/// Inference-mode batch norm against read-only running statistics.
template <typename T>
Var<T> batchnorm(Var<T> input, Var<T> gamma, Var<T> beta, const BatchNormState<T>& state);

/// (1 / 2N) * sum (a - b)^2, N = element count.
template <typename T>
Var<T> mse(Var<T> a, Var<T> b);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> add_scalar(Var<T> a, T c);

template <typename T>
Var<T> scale(Var<T> a, T c);

/// Natural log; operands must be positive.
template <typename T>
Var<T> log(Var<T> a);

/// a^p for a >= 0.
template <typename T>
Var<T> pow(Var<T> a, T p);

/// min(max(a, lo), hi); gradient is zero where the value was clamped.
template <typename T>
Var<T> clamp(Var<T> a, T lo, T hi);

}  // namespace drht
