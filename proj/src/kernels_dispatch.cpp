#include "phasegen/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace phasegen::kernels {

#if PG_SIMD_X86
bool cpu_has_avx2() {
#if defined(__GNUC__) || defined(__clang__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}
#endif

namespace {

Isa resolve_isa() {
  const char* env = std::getenv("PHASEGEN_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::scalar;
#if PG_SIMD_X86
  const bool avx2_ok = cpu_has_avx2();
  if (env != nullptr && std::strcmp(env, "avx2") == 0) return avx2_ok ? Isa::avx2 : Isa::scalar;
  if (env == nullptr || std::strcmp(env, "auto") == 0) return avx2_ok ? Isa::avx2 : Isa::scalar;
  return Isa::scalar;
#elif PG_SIMD_ARM64
  if (env != nullptr && std::strcmp(env, "neon") == 0) return Isa::neon;
  if (env == nullptr || std::strcmp(env, "auto") == 0) return Isa::neon;
  return Isa::scalar;
#else
  return Isa::scalar;
#endif
}

}  // namespace

Isa active_isa() {
  static const Isa isa = resolve_isa();
  return isa;
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
    case Isa::scalar:
    default:
      return "scalar";
  }
}

const KernelTable& table_for(Isa isa) {
  switch (isa) {
#if PG_SIMD_X86
    case Isa::avx2:
      if (cpu_has_avx2()) return kAvx2Table;
      return kScalarTable;
#endif
#if PG_SIMD_ARM64
    case Isa::neon:
      return kNeonTable;
#endif
    default:
      return kScalarTable;
  }
}

const KernelTable& active() {
  static const KernelTable& table = table_for(active_isa());
  return table;
}

}  // namespace phasegen::kernels
