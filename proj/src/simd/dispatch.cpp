#include <stdexcept>

#include "hjm3/simd.hpp"

namespace hjm3::simd {

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if HJM3_SIMD_X86 && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon: return HJM3_SIMD_NEON != 0;
  }
  return false;
}

Isa best_isa() {
  if (isa_available(Isa::Avx2)) return Isa::Avx2;
  if (isa_available(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

Kernels kernels_for(Isa isa) {
  if (!isa_available(isa)) throw std::invalid_argument("kernel variant '" + to_string(isa) + "' not available");
  Kernels k;
  k.isa = isa;
#if HJM3_SIMD_X86
  if (isa == Isa::Avx2) {
    k.curve_step = curve_step_avx2;
    k.triangle = triangle_avx2;
  }
#endif
#if HJM3_SIMD_NEON
  if (isa == Isa::Neon) {
    k.curve_step = curve_step_neon;
    k.triangle = triangle_neon;
  }
#endif
  return k;
}

Kernels default_kernels() { return kernels_for(best_isa()); }

std::string to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "?";
}

Isa parse_isa(const std::string& s) {
  if (s == "scalar") return Isa::Scalar;
  if (s == "avx2") return Isa::Avx2;
  if (s == "neon") return Isa::Neon;
  if (s == "auto") return best_isa();
  throw std::invalid_argument("unknown kernel variant '" + s + "'");
}

}  // namespace hjm3::simd
