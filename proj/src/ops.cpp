#include "drht/ops.hpp"

#include <cmath>
#include <memory>
#include <vector>

#include "drht/kernels.hpp"

namespace drht {

namespace {

template <typename T>
void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) throw ShapeError(std::string(op) + " expects an NCHW tensor, got " + to_string(s));
}

template <typename T>
void require_bias(const Shape& bias, std::size_t channels, const char* op) {
  if (bias != Shape{channels}) {
    throw ShapeError(std::string(op) + ": bias shape " + to_string(bias) + " does not match " +
                     std::to_string(channels) + " output channels");
  }
}

// Unary element-wise op: value = f(x), dx += dy * df(x, y).
template <typename T, typename F, typename DF>
Var<T> unary(Var<T> a, const char* name, F f, DF df) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  const std::size_t n = x.size();
  const T* xs = x.data();
  T* ys = y.data();
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::size_t i = 0; i < n; ++i) ys[i] = f(xs[i]);
  const std::size_t ia = a.id;
  return a.tape->record(
      std::move(y), {a},
      [ia, df](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& xv = tape.value(ia);
        const Tensor<T>& yv = tape.value(self);
        const Tensor<T>& gy = tape.grad_buffer(self);
        Tensor<T>& gx = tape.grad_buffer(ia);
        const std::size_t count = xv.size();
#pragma omp parallel for schedule(static) if (count > 65536)
        for (std::size_t i = 0; i < count; ++i) gx[i] += gy[i] * df(xv[i], yv[i]);
      },
      name);
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> weight, Var<T> bias, std::size_t stride) {
  const auto g = kernels::conv_geometry(input.shape(), weight.shape(), stride);
  require_bias<T>(bias.shape(), g.out_channels, "conv2d");
  Tensor<T> out(g.output_shape());
  kernels::conv2d_forward(g, input.value().data(), weight.value().data(), bias.value().data(), out.data());
  const std::size_t ix = input.id, iw = weight.id, ib = bias.id;
  return input.tape->record(
      std::move(out), {input, weight, bias},
      [g, ix, iw, ib](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& gy = tape.grad_buffer(self);
        if (tape.requires_grad(iw) || tape.requires_grad(ib)) {
          T* db = tape.requires_grad(ib) ? tape.grad_buffer(ib).data() : nullptr;
          if (tape.requires_grad(iw)) {
            kernels::conv2d_backward_weight(g, tape.value(ix).data(), gy.data(), tape.grad_buffer(iw).data(), db);
          } else {
            kernels::accumulate_channel_sum(g.batch, g.out_channels, g.out_pixels(), gy.data(), db);
          }
        }
        if (tape.requires_grad(ix)) {
          kernels::conv2d_backward_input(g, gy.data(), tape.value(iw).data(), tape.grad_buffer(ix).data());
        }
      },
      "conv2d");
}

template <typename T>
Var<T> conv2d_transpose(Var<T> input, Var<T> weight, Var<T> bias, std::size_t stride) {
  // g describes the conv whose adjoint this op is: g.output == our input, g.input == our output.
  const auto g = kernels::transpose_conv_geometry(input.shape(), weight.shape(), stride);
  require_bias<T>(bias.shape(), g.in_channels, "conv2d_transpose");
  Tensor<T> out(g.input_shape());
  kernels::conv2d_backward_input(g, input.value().data(), weight.value().data(), out.data());
  kernels::add_channel_bias(g.batch, g.in_channels, g.in_pixels(), bias.value().data(), out.data());
  const std::size_t ix = input.id, iw = weight.id, ib = bias.id;
  return input.tape->record(
      std::move(out), {input, weight, bias},
      [g, ix, iw, ib](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& gy = tape.grad_buffer(self);
        if (tape.requires_grad(ib)) {
          kernels::accumulate_channel_sum(g.batch, g.in_channels, g.in_pixels(), gy.data(),
                                          tape.grad_buffer(ib).data());
        }
        if (tape.requires_grad(iw)) {
          kernels::conv2d_backward_weight(g, gy.data(), tape.value(ix).data(), tape.grad_buffer(iw).data(),
                                          static_cast<T*>(nullptr));
        }
        if (tape.requires_grad(ix)) {
          // Adjoint of the adjoint is the forward conv; accumulate through a scratch buffer.
          Tensor<T> tmp(g.output_shape());
          kernels::conv2d_forward(g, gy.data(), tape.value(iw).data(), static_cast<const T*>(nullptr), tmp.data());
          Tensor<T>& gx = tape.grad_buffer(ix);
          for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
        }
      },
      "conv2d_transpose");
}

template <typename T>
Var<T> elu(Var<T> input) {
  constexpr T a = static_cast<T>(kEluAlpha);
  return unary(
      input, "elu", [](T x) { return x > T{0} ? x : a * std::expm1(x); },
      [](T x, T y) { return x > T{0} ? T{1} : y + a; });
}

template <typename T>
Var<T> batchnorm_impl(Var<T> input, Var<T> gamma, Var<T> beta, const BatchNormState<T>& state,
                      BatchNormState<T>* update, BatchNormMode mode) {
  const Shape& s = input.shape();
  require_rank4<T>(s, "batchnorm");
  const std::size_t N = s[0], C = s[1], P = s[2] * s[3];
  const Shape channel_shape{C};
  require_same_shape(gamma.shape(), channel_shape, "batchnorm gamma");
  require_same_shape(beta.shape(), channel_shape, "batchnorm beta");
  require_same_shape(state.running_mean.shape(), channel_shape, "batchnorm running mean");
  require_same_shape(state.running_var.shape(), channel_shape, "batchnorm running var");
  const std::size_t M = N * P;
  if (mode == BatchNormMode::Train && M < 2) {
    throw InvalidArgument("batchnorm in train mode needs at least 2 values per channel, got " + std::to_string(M));
  }

  const Tensor<T>& x = input.value();
  const Tensor<T>& gm = gamma.value();
  const Tensor<T>& bt = beta.value();
  auto xhat = std::make_shared<Tensor<T>>(s);
  auto inv_std = std::make_shared<std::vector<T>>(C);
  Tensor<T> y(s);
  const T eps = static_cast<T>(kBatchNormEpsilon);
  const T momentum = static_cast<T>(kBatchNormMomentum);

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < C; ++c) {
    T mean, var;
    if (mode == BatchNormMode::Train) {
      T sum{0};
      for (std::size_t n = 0; n < N; ++n) {
        const T* row = x.data() + (n * C + c) * P;
        for (std::size_t p = 0; p < P; ++p) sum += row[p];
      }
      mean = sum / static_cast<T>(M);
      T sq{0};
      for (std::size_t n = 0; n < N; ++n) {
        const T* row = x.data() + (n * C + c) * P;
        for (std::size_t p = 0; p < P; ++p) {
          const T d = row[p] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<T>(M);
      if (update) {
        update->running_mean[c] = momentum * update->running_mean[c] + (T{1} - momentum) * mean;
        update->running_var[c] = momentum * update->running_var[c] + (T{1} - momentum) * var;
      }
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    const T inv = T{1} / std::sqrt(var + eps);
    (*inv_std)[c] = inv;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t base = (n * C + c) * P;
      for (std::size_t p = 0; p < P; ++p) {
        const T xh = (x[base + p] - mean) * inv;
        (*xhat)[base + p] = xh;
        y[base + p] = gm[c] * xh + bt[c];
      }
    }
  }

  const std::size_t ix = input.id, ig = gamma.id, ib = beta.id;
  return input.tape->record(
      std::move(y), {input, gamma, beta},
      [=](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& gy = tape.grad_buffer(self);
        const Tensor<T>& gmv = tape.value(ig);
        const bool need_x = tape.requires_grad(ix);
        const bool need_g = tape.requires_grad(ig);
        const bool need_b = tape.requires_grad(ib);
        T* gx = need_x ? tape.grad_buffer(ix).data() : nullptr;
        T* gg = need_g ? tape.grad_buffer(ig).data() : nullptr;
        T* gb = need_b ? tape.grad_buffer(ib).data() : nullptr;
#pragma omp parallel for schedule(static)
        for (std::size_t c = 0; c < C; ++c) {
          T sum_dy{0}, sum_dy_xhat{0};
          for (std::size_t n = 0; n < N; ++n) {
            const std::size_t base = (n * C + c) * P;
            for (std::size_t p = 0; p < P; ++p) {
              sum_dy += gy[base + p];
              sum_dy_xhat += gy[base + p] * (*xhat)[base + p];
            }
          }
          if (gg) gg[c] += sum_dy_xhat;
          if (gb) gb[c] += sum_dy;
          if (!gx) continue;
          const T inv = (*inv_std)[c];
          if (mode == BatchNormMode::Train) {
            const T k = gmv[c] * inv / static_cast<T>(M);
            const T mean_dy = sum_dy;
            for (std::size_t n = 0; n < N; ++n) {
              const std::size_t base = (n * C + c) * P;
              for (std::size_t p = 0; p < P; ++p) {
                gx[base + p] += k * (static_cast<T>(M) * gy[base + p] - mean_dy - (*xhat)[base + p] * sum_dy_xhat);
              }
            }
          } else {
            const T k = gmv[c] * inv;
            for (std::size_t n = 0; n < N; ++n) {
              const std::size_t base = (n * C + c) * P;
              for (std::size_t p = 0; p < P; ++p) gx[base + p] += k * gy[base + p];
            }
          }
        }
      },
      "batchnorm");
}

template <typename T>
Var<T> batchnorm(Var<T> input, Var<T> gamma, Var<T> beta, BatchNormState<T>& state, BatchNormMode mode) {
  return batchnorm_impl(input, gamma, beta, state, &state, mode);
}

template <typename T>
Var<T> batchnorm(Var<T> input, Var<T> gamma, Var<T> beta, const BatchNormState<T>& state) {
  return batchnorm_impl(input, gamma, beta, state, static_cast<BatchNormState<T>*>(nullptr),
                        BatchNormMode::Infer);
}

template <typename T>
Var<T> mse(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "mse");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  T acc{0};
  for (std::size_t i = 0; i < av.size(); ++i) {
    const T d = av[i] - bv[i];
    acc += d * d;
  }
  const T n = static_cast<T>(av.size());
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(
      Tensor<T>::scalar(acc / (T{2} * n)), {a, b},
      [ia, ib, n](Tape<T>& tape, std::size_t self) {
        const T g = tape.grad_buffer(self)[0] / n;
        const Tensor<T>& x = tape.value(ia);
        const Tensor<T>& y = tape.value(ib);
        if (tape.requires_grad(ia)) {
          Tensor<T>& gx = tape.grad_buffer(ia);
          for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g * (x[i] - y[i]);
        }
        if (tape.requires_grad(ib)) {
          Tensor<T>& gyv = tape.grad_buffer(ib);
          for (std::size_t i = 0; i < x.size(); ++i) gyv[i] -= g * (x[i] - y[i]);
        }
      },
      "mse");
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "add");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> out(av.shape());
  const std::size_t n = av.size();
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(
      std::move(out), {a, b},
      [ia, ib](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad_buffer(self);
        for (std::size_t id : {ia, ib}) {
          if (!tape.requires_grad(id)) continue;
          Tensor<T>& gx = tape.grad_buffer(id);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
      },
      "add");
}

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
  return unary(
      a, "add_scalar", [c](T x) { return x + c; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
  return unary(
      a, "scale", [c](T x) { return x * c; }, [c](T, T) { return c; });
}

template <typename T>
Var<T> log(Var<T> a) {
  if (a.tape->check_finite()) {
    for (T v : a.value().values()) {
      if (!(v > T{0})) throw NonFiniteError("log of a non-positive value");
    }
  }
  return unary(
      a, "log", [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
}

template <typename T>
Var<T> pow(Var<T> a, T p) {
  return unary(
      a, "pow", [p](T x) { return std::pow(x, p); },
      [p](T x, T) {
        if (x > T{0}) return p * std::pow(x, p - T{1});
        // Derivative at the origin: 0 for p > 1, 1 for p == 1; undefined (taken as 0) for p < 1.
        return p == T{1} ? T{1} : T{0};
      });
}

template <typename T>
Var<T> clamp(Var<T> a, T lo, T hi) {
  if (lo > hi) throw InvalidArgument("clamp: lower bound exceeds upper bound");
  return unary(
      a, "clamp", [lo, hi](T x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](T x, T) { return (x < lo || x > hi) ? T{0} : T{1}; });
}

#define DRHT_INSTANTIATE(T)                                                                            \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, std::size_t);                                        \
  template Var<T> conv2d_transpose(Var<T>, Var<T>, Var<T>, std::size_t);                              \
  template Var<T> elu(Var<T>);                                                                         \
  template Var<T> batchnorm(Var<T>, Var<T>, Var<T>, BatchNormState<T>&, BatchNormMode);               \
  template Var<T> batchnorm(Var<T>, Var<T>, Var<T>, const BatchNormState<T>&);                         \
  template Var<T> mse(Var<T>, Var<T>);                                                                 \
  template Var<T> add(Var<T>, Var<T>);                                                                 \
  template Var<T> add_scalar(Var<T>, T);                                                               \
  template Var<T> scale(Var<T>, T);                                                                    \
  template Var<T> log(Var<T>);                                                                         \
  template Var<T> pow(Var<T>, T);                                                                      \
  template Var<T> clamp(Var<T>, T, T);
DRHT_INSTANTIATE(float)
DRHT_INSTANTIATE(double)
#undef DRHT_INSTANTIATE

}  // namespace drht
