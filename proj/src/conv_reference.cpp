// Serial direct-loop convolution. Slow on purpose: every output is a plain
// nested sum, which makes it a readable baseline for tests and benchmarks.

#include "drht/kernels.hpp"

namespace drht::kernels::reference {

namespace {

template <typename T>
struct View {
  const ConvGeometry& g;
  std::size_t x_index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * g.in_channels + c) * g.in_h + y) * g.in_w + x;
  }
  std::size_t y_index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * g.out_channels + c) * g.out_h + y) * g.out_w + x;
  }
  std::size_t w_index(std::size_t co, std::size_t ci, std::size_t i, std::size_t j) const {
    return ((co * g.in_channels + ci) * g.kernel_h + i) * g.kernel_w + j;
  }
  // Input coordinate touched by output (oy, ox) through tap (i, j), or false if in the padding.
  bool source(std::size_t oy, std::size_t ox, std::size_t i, std::size_t j, std::size_t& iy,
              std::size_t& ix) const {
    const long sy = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad_h);
    const long sx = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad_w);
    if (sy < 0 || sx < 0 || sy >= static_cast<long>(g.in_h) || sx >= static_cast<long>(g.in_w)) return false;
    iy = static_cast<std::size_t>(sy);
    ix = static_cast<std::size_t>(sx);
    return true;
  }
};

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const View<T> v{g};
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          T acc = bias ? bias[co] : T{0};
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t i = 0; i < g.kernel_h; ++i)
              for (std::size_t j = 0; j < g.kernel_w; ++j) {
                std::size_t iy, ix;
                if (v.source(oy, ox, i, j, iy, ix)) acc += x[v.x_index(n, ci, iy, ix)] * w[v.w_index(co, ci, i, j)];
              }
          y[v.y_index(n, co, oy, ox)] = acc;
        }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, const T* dy, const T* w, T* dx) {
  const View<T> v{g};
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const T gy = dy[v.y_index(n, co, oy, ox)];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t i = 0; i < g.kernel_h; ++i)
              for (std::size_t j = 0; j < g.kernel_w; ++j) {
                std::size_t iy, ix;
                if (v.source(oy, ox, i, j, iy, ix)) dx[v.x_index(n, ci, iy, ix)] += gy * w[v.w_index(co, ci, i, j)];
              }
        }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dw, T* db) {
  const View<T> v{g};
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const T gy = dy[v.y_index(n, co, oy, ox)];
          if (db) db[co] += gy;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t i = 0; i < g.kernel_h; ++i)
              for (std::size_t j = 0; j < g.kernel_w; ++j) {
                std::size_t iy, ix;
                if (v.source(oy, ox, i, j, iy, ix)) dw[v.w_index(co, ci, i, j)] += gy * x[v.x_index(n, ci, iy, ix)];
              }
        }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward_input<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv2d_backward_input<double>(const ConvGeometry&, const double*, const double*, double*);
template void conv2d_backward_weight<float>(const ConvGeometry&, const float*, const float*, float*, float*);
template void conv2d_backward_weight<double>(const ConvGeometry&, const double*, const double*, double*, double*);

}  // namespace drht::kernels::reference
