#include "hjm3/simd.hpp"

#if HJM3_SIMD_X86

#include <immintrin.h>

namespace hjm3::simd {

// No FMA: the scalar reference rounds after every multiply.
__attribute__((target("avx2"))) void curve_step_avx2(const CurveStep& a) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= a.n; i += 4) {
    const __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(a.idx + i));
    const __m256d lo = _mm256_i32gather_pd(a.f, vi, 8);
    const __m256d hi = _mm256_i32gather_pd(a.f + 1, vi, 8);
    const __m256d w = _mm256_loadu_pd(a.w + i);
    __m256d x = _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(one, w), lo), _mm256_mul_pd(w, hi));
    x = _mm256_add_pd(x, _mm256_loadu_pd(a.drift_dt + i));
    for (std::size_t k = 0; k < a.n_factors; ++k) {
      const __m256d v = _mm256_loadu_pd(a.vol + k * a.n + i);
      x = _mm256_add_pd(x, _mm256_mul_pd(v, _mm256_set1_pd(a.dw[k])));
    }
    _mm256_storeu_pd(a.out + i, x);
  }
  for (; i < a.n; ++i) {
    const std::int32_t j = a.idx[i];
    double x = (1.0 - a.w[i]) * a.f[j] + a.w[i] * a.f[j + 1];
    x += a.drift_dt[i];
    for (std::size_t k = 0; k < a.n_factors; ++k) x += a.vol[k * a.n + i] * a.dw[k];
    a.out[i] = x;
  }
}

__attribute__((target("avx2"))) void triangle_avx2(const double* s, const double* fn, const double* fr,
                                                    std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_add_pd(_mm256_loadu_pd(s + i), _mm256_loadu_pd(fn + i));
    _mm256_storeu_pd(out + i, _mm256_sub_pd(x, _mm256_loadu_pd(fr + i)));
  }
  for (; i < n; ++i) out[i] = (s[i] + fn[i]) - fr[i];
}

}  // namespace hjm3::simd

#endif
