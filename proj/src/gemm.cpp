#include <cstring>

#include "gemm_impl.hpp"

namespace drht::kernels {

template <typename T>
void gemm(Transpose trans_a, Transpose trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  constexpr std::size_t NR = detail::Tile<T>::kNR;
  auto pack = [&](std::size_t k0, std::size_t kc, std::size_t col0, std::size_t cols, T* dst) {
    if (trans_b == Transpose::No) {
      for (std::size_t p = 0; p < kc; ++p) std::memcpy(dst + p * NR, b + (k0 + p) * ldb + col0, cols * sizeof(T));
    } else {
      for (std::size_t j = 0; j < cols; ++j) {
        const T* src = b + (col0 + j) * ldb + k0;
        for (std::size_t p = 0; p < kc; ++p) dst[p * NR + j] = src[p];
      }
    }
  };
  detail::gemm_packed(trans_a, m, n, k, a, lda, pack, c, ldc, accumulate);
}

template void gemm<float>(Transpose, Transpose, std::size_t, std::size_t, std::size_t, const float*, std::size_t,
                          const float*, std::size_t, float*, std::size_t, bool);
template void gemm<double>(Transpose, Transpose, std::size_t, std::size_t, std::size_t, const double*,
                           std::size_t, const double*, std::size_t, double*, std::size_t, bool);

}  // namespace drht::kernels
