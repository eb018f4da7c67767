#include "sea/simd/kernels.hpp"

#if defined(__AVX2__)
#include <immintrin.h>

namespace sea::simd::avx2 {

double dot(const float* a, const float* b, std::size_t n) noexcept {
  __m256d lo = _mm256_setzero_pd();
  __m256d hi = _mm256_setzero_pd();
  const std::size_t body = n - n % 8;
  for (std::size_t i = 0; i < body; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    const __m256d a_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(va));
    const __m256d b_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(vb));
    const __m256d a_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(va, 1));
    const __m256d b_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1));
    lo = _mm256_add_pd(lo, _mm256_mul_pd(a_lo, b_lo));
    hi = _mm256_add_pd(hi, _mm256_mul_pd(a_hi, b_hi));
  }
  alignas(32) double m[4];
  _mm256_store_pd(m, _mm256_add_pd(lo, hi));
  double s = (m[0] + m[1]) + (m[2] + m[3]);
  for (std::size_t i = body; i < n; ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

}  // namespace sea::simd::avx2

#else

namespace sea::simd::avx2 {
double dot(const float* a, const float* b, std::size_t n) noexcept {
  return scalar::dot(a, b, n);
}
}  // namespace sea::simd::avx2

#endif
