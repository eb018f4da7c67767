#include "sea/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace sea::simd::neon {

double dot(const float* a, const float* b, std::size_t n) noexcept {
  // Four float64x2 accumulators hold lanes {0,1},{2,3},{4,5},{6,7}.
  float64x2_t l01 = vdupq_n_f64(0.0);
  float64x2_t l23 = vdupq_n_f64(0.0);
  float64x2_t l45 = vdupq_n_f64(0.0);
  float64x2_t l67 = vdupq_n_f64(0.0);
  const std::size_t body = n - n % 8;
  for (std::size_t i = 0; i < body; i += 8) {
    const float32x4_t a0 = vld1q_f32(a + i);
    const float32x4_t b0 = vld1q_f32(b + i);
    const float32x4_t a1 = vld1q_f32(a + i + 4);
    const float32x4_t b1 = vld1q_f32(b + i + 4);
    l01 = vaddq_f64(l01, vmulq_f64(vcvt_f64_f32(vget_low_f32(a0)),
                                   vcvt_f64_f32(vget_low_f32(b0))));
    l23 = vaddq_f64(l23, vmulq_f64(vcvt_high_f64_f32(a0), vcvt_high_f64_f32(b0)));
    l45 = vaddq_f64(l45, vmulq_f64(vcvt_f64_f32(vget_low_f32(a1)),
                                   vcvt_f64_f32(vget_low_f32(b1))));
    l67 = vaddq_f64(l67, vmulq_f64(vcvt_high_f64_f32(a1), vcvt_high_f64_f32(b1)));
  }
  const float64x2_t m01 = vaddq_f64(l01, l45);
  const float64x2_t m23 = vaddq_f64(l23, l67);
  double s = (vgetq_lane_f64(m01, 0) + vgetq_lane_f64(m01, 1)) +
             (vgetq_lane_f64(m23, 0) + vgetq_lane_f64(m23, 1));
  for (std::size_t i = body; i < n; ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

}  // namespace sea::simd::neon

#else

namespace sea::simd::neon {
double dot(const float* a, const float* b, std::size_t n) noexcept {
  return scalar::dot(a, b, n);
}
}  // namespace sea::simd::neon

#endif
