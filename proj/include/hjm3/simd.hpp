#pragma once

// Inner-loop kernels for the Musiela-grid update. Every variant evaluates the same
// operations in the same order, so results are bit-identical across variants.

#include <cstddef>
#include <cstdint>
#include <string>

#if defined(__x86_64__) || defined(_M_X64)
#define HJM3_SIMD_X86 1
#else
#define HJM3_SIMD_X86 0
#endif

#if defined(__aarch64__) || defined(_M_ARM64)
#define HJM3_SIMD_NEON 1
#else
#define HJM3_SIMD_NEON 0
#endif

namespace hjm3::simd {

enum class Isa { Scalar, Avx2, Neon };

// out[i] = (1 - w[i]) * f[idx[i]] + w[i] * f[idx[i] + 1] + drift_dt[i] + sum_k vol[k * n + i] * dw[k]
// idx[i] + 1 must be a valid index into f. out must not alias f.
struct CurveStep {
  const double* f;
  const std::int32_t* idx;
  const double* w;
  const double* drift_dt;
  const double* vol;
  const double* dw;
  std::size_t n_factors;
  std::size_t n;
  double* out;
};

using CurveStepFn = void (*)(const CurveStep&);
// out[i] = (s[i] + fn[i]) - fr[i]
using TriangleFn = void (*)(const double* s, const double* fn, const double* fr, std::size_t n, double* out);

void curve_step_scalar(const CurveStep& a);
void triangle_scalar(const double* s, const double* fn, const double* fr, std::size_t n, double* out);

#if HJM3_SIMD_X86
void curve_step_avx2(const CurveStep& a);
void triangle_avx2(const double* s, const double* fn, const double* fr, std::size_t n, double* out);
#endif

#if HJM3_SIMD_NEON
void curve_step_neon(const CurveStep& a);
void triangle_neon(const double* s, const double* fn, const double* fr, std::size_t n, double* out);
#endif

struct Kernels {
  Isa isa = Isa::Scalar;
  CurveStepFn curve_step = curve_step_scalar;
  TriangleFn triangle = triangle_scalar;
};

bool isa_available(Isa isa);
Isa best_isa();
// Throws std::invalid_argument if the requested variant is not available on this CPU.
Kernels kernels_for(Isa isa);
Kernels default_kernels();

std::string to_string(Isa isa);
Isa parse_isa(const std::string& s);

}  // namespace hjm3::simd
