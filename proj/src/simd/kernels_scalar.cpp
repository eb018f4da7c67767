#include "sea/simd/kernels.hpp"

namespace sea::simd::scalar {

double dot(const float* a, const float* b, std::size_t n) noexcept {
  double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  const std::size_t body = n - n % 8;
  for (std::size_t i = 0; i < body; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) {
      lane[l] += static_cast<double>(a[i + l]) * static_cast<double>(b[i + l]);
    }
  }
  // Reduction order mirrors the vector variants: fold the upper half onto
  // the lower half, then pairwise.
  double m[4];
  for (std::size_t l = 0; l < 4; ++l) m[l] = lane[l] + lane[l + 4];
  double s = (m[0] + m[1]) + (m[2] + m[3]);
  for (std::size_t i = body; i < n; ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

}  // namespace sea::simd::scalar
