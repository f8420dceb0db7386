#pragma once

// Test-local metric oracles shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>

#include "drht/metrics.hpp"

namespace drht::testing {

// FSIM of the textured fixture against its 3x3 box blur and against flat gray,
// recorded from a reference run and frozen to catch drift.
inline constexpr double kFrozenBlurred = 0.924946659;
inline constexpr double kFrozenGray = 0.225548300;

inline LdrImage constant(std::size_t w, std::size_t h, float v) { return LdrImage(w, h, v); }

// Deterministic texture: two gratings, a checkerboard and a bright disc.
inline LdrImage textured_fixture() {
  LdrImage img(64, 64);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const double g = 0.5 + 0.2 * std::sin(0.35 * x) * std::cos(0.21 * y);
      const double checker = ((x / 8 + y / 8) % 2) ? 0.1 : -0.1;
      const double r2 = (x - 40.0) * (x - 40.0) + (y - 20.0) * (y - 20.0);
      const double disc = r2 < 64.0 ? 0.25 : 0.0;
      const double v = std::clamp(g + checker + disc, 0.0, 1.0);
      img.at(x, y, 0) = static_cast<float>(v);
      img.at(x, y, 1) = static_cast<float>(0.9 * v);
      img.at(x, y, 2) = static_cast<float>(std::clamp(1.1 * v, 0.0, 1.0));
    }
  return img;
}

// 3x3 box filter with clamped borders.
inline LdrImage box_blur(const LdrImage& a) {
  LdrImage out(a.width, a.height);
  const auto w = static_cast<long>(a.width), h = static_cast<long>(a.height);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (long dy = -1; dy <= 1; ++dy)
          for (long dx = -1; dx <= 1; ++dx) {
            const long xx = std::clamp(x + dx, 0L, w - 1), yy = std::clamp(y + dy, 0L, h - 1);
            s += a.at(xx, yy, c);
          }
        out.at(x, y, c) = static_cast<float>(s / 9.0);
      }
  return out;
}

// Direct per-window evaluation with a two-pass variance.
inline double naive_ssim(const LdrImage& a, const LdrImage& b) {
  const auto lx = luma(a), ly = luma(b);
  double g[11], gs = 0.0;
  for (int i = 0; i < 11; ++i) gs += g[i] = std::exp(-(i - 5.0) * (i - 5.0) / 4.5);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + 11 <= a.height; ++r)
    for (std::size_t c = 0; c + 11 <= a.width; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i] * g[j] / (gs * gs);
          mx += w * lx[(r + i) * a.width + c + j];
          my += w * ly[(r + i) * a.width + c + j];
        }
      double vx = 0, vy = 0, cov = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i] * g[j] / (gs * gs);
          const double dx = lx[(r + i) * a.width + c + j] - mx, dy = ly[(r + i) * a.width + c + j] - my;
          vx += w * dx * dx;
          vy += w * dy * dy;
          cov += w * dx * dy;
        }
      total += (2 * mx * my + 1e-4) * (2 * cov + 9e-4) / ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace drht::testing
