#include "hjm3/simd.hpp"

#if HJM3_SIMD_NEON

#include <arm_neon.h>

namespace hjm3::simd {

void curve_step_neon(const CurveStep& a) {
  const float64x2_t one = vdupq_n_f64(1.0);
  std::size_t i = 0;
  for (; i + 2 <= a.n; i += 2) {
    const std::int32_t j0 = a.idx[i], j1 = a.idx[i + 1];
    const float64x2_t lo = vsetq_lane_f64(a.f[j1], vdupq_n_f64(a.f[j0]), 1);
    const float64x2_t hi = vsetq_lane_f64(a.f[j1 + 1], vdupq_n_f64(a.f[j0 + 1]), 1);
    const float64x2_t w = vld1q_f64(a.w + i);
    float64x2_t x = vaddq_f64(vmulq_f64(vsubq_f64(one, w), lo), vmulq_f64(w, hi));
    x = vaddq_f64(x, vld1q_f64(a.drift_dt + i));
    for (std::size_t k = 0; k < a.n_factors; ++k) {
      const float64x2_t v = vld1q_f64(a.vol + k * a.n + i);
      x = vaddq_f64(x, vmulq_f64(v, vdupq_n_f64(a.dw[k])));
    }
    vst1q_f64(a.out + i, x);
  }
  for (; i < a.n; ++i) {
    const std::int32_t j = a.idx[i];
    double x = (1.0 - a.w[i]) * a.f[j] + a.w[i] * a.f[j + 1];
    x += a.drift_dt[i];
    for (std::size_t k = 0; k < a.n_factors; ++k) x += a.vol[k * a.n + i] * a.dw[k];
    a.out[i] = x;
  }
}

void triangle_neon(const double* s, const double* fn, const double* fr, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t x = vaddq_f64(vld1q_f64(s + i), vld1q_f64(fn + i));
    vst1q_f64(out + i, vsubq_f64(x, vld1q_f64(fr + i)));
  }
  for (; i < n; ++i) out[i] = (s[i] + fn[i]) - fr[i];
}

}  // namespace hjm3::simd

#endif
