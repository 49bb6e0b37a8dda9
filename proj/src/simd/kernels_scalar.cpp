#include "hjm3/simd.hpp"

namespace hjm3::simd {

void curve_step_scalar(const CurveStep& a) {
  for (std::size_t i = 0; i < a.n; ++i) {
    const std::int32_t j = a.idx[i];
    double x = (1.0 - a.w[i]) * a.f[j] + a.w[i] * a.f[j + 1];
    x += a.drift_dt[i];
    for (std::size_t k = 0; k < a.n_factors; ++k) x += a.vol[k * a.n + i] * a.dw[k];
    a.out[i] = x;
  }
}

void triangle_scalar(const double* s, const double* fn, const double* fr, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (s[i] + fn[i]) - fr[i];
}

}  // namespace hjm3::simd
