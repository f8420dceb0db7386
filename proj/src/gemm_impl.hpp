#pragma once

// Packed GEMM core shared by the dense GEMM and the implicit-im2col
// convolutions. The B operand is supplied through a packing callback so that
// convolution patches can be gathered straight into cache-resident panels.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "drht/kernels.hpp"

namespace drht::kernels::detail {

template <typename T>
struct Tile {
  static constexpr std::size_t kMR = 6;
  static constexpr std::size_t kNR = 2 * 64 / sizeof(T);
  static constexpr std::size_t kKC = 256;
  static constexpr std::size_t kNC = 2048;
};

template <typename T>
inline void micro_kernel(std::size_t kc, const T* __restrict pa, const T* __restrict pb, T* __restrict c,
                         std::size_t ldc, std::size_t rows, std::size_t cols) {
  constexpr std::size_t MR = Tile<T>::kMR;
  constexpr std::size_t NR = Tile<T>::kNR;
  T acc[MR][NR] = {};
  for (std::size_t p = 0; p < kc; ++p) {
    const T* bp = pb + p * NR;
    const T* ap = pa + p * MR;
    for (std::size_t r = 0; r < MR; ++r) {
      const T av = ap[r];
#pragma omp simd
      for (std::size_t j = 0; j < NR; ++j) acc[r][j] += av * bp[j];
    }
  }
  if (rows == MR && cols == NR) {
    for (std::size_t r = 0; r < MR; ++r) {
      T* crow = c + r * ldc;
#pragma omp simd
      for (std::size_t j = 0; j < NR; ++j) crow[j] += acc[r][j];
    }
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < cols; ++j) c[r * ldc + j] += acc[r][j];
    }
  }
}

/// C (+)= op(A) * B where B is produced panel by panel:
/// pack_b(k0, kc, col0, cols, dst) must write dst[p * NR + j] = B(k0 + p, col0 + j)
/// for p < kc, j < cols. dst arrives zero-filled.
template <typename T, typename PackB>
void gemm_packed(Transpose trans_a, std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                 PackB&& pack_b, T* c, std::size_t ldc, bool accumulate) {
  constexpr std::size_t MR = Tile<T>::kMR;
  constexpr std::size_t NR = Tile<T>::kNR;
  constexpr std::size_t KC = Tile<T>::kKC;
  constexpr std::size_t NC = Tile<T>::kNC;

  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, T{0});
  }
  if (m == 0 || n == 0 || k == 0) return;

  const std::size_t m_panels = (m + MR - 1) / MR;
  std::vector<T> packed_a;
  std::vector<T> packed_b;

  for (std::size_t k0 = 0; k0 < k; k0 += KC) {
    const std::size_t kc = std::min(KC, k - k0);
    packed_a.assign(m_panels * MR * kc, T{0});
    T* pa_base = packed_a.data();
#pragma omp parallel for schedule(static)
    for (std::size_t panel = 0; panel < m_panels; ++panel) {
      T* dst = pa_base + panel * MR * kc;
      const std::size_t rows = std::min(MR, m - panel * MR);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = panel * MR + r;
        if (trans_a == Transpose::No) {
          const T* src = a + i * lda + k0;
          for (std::size_t p = 0; p < kc; ++p) dst[p * MR + r] = src[p];
        } else {
          for (std::size_t p = 0; p < kc; ++p) dst[p * MR + r] = a[(k0 + p) * lda + i];
        }
      }
    }

    for (std::size_t n0 = 0; n0 < n; n0 += NC) {
      const std::size_t nc = std::min(NC, n - n0);
      const std::size_t n_panels = (nc + NR - 1) / NR;
      packed_b.assign(n_panels * NR * kc, T{0});
      T* pb_base = packed_b.data();
#pragma omp parallel for schedule(static)
      for (std::size_t panel = 0; panel < n_panels; ++panel) {
        const std::size_t col0 = n0 + panel * NR;
        pack_b(k0, kc, col0, std::min(NR, n - col0), pb_base + panel * NR * kc);
      }

      const std::size_t tiles = n_panels * m_panels;
#pragma omp parallel for schedule(static)
      for (std::size_t tile = 0; tile < tiles; ++tile) {
        const std::size_t q = tile / m_panels;
        const std::size_t panel = tile % m_panels;
        const std::size_t row0 = panel * MR;
        const std::size_t col0 = n0 + q * NR;
        micro_kernel<T>(kc, pa_base + panel * MR * kc, pb_base + q * NR * kc, c + row0 * ldc + col0, ldc,
                        std::min(MR, m - row0), std::min(NR, n - col0));
      }
    }
  }
}

}  // namespace drht::kernels::detail
