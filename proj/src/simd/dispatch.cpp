#include <cstdlib>
#include <string_view>

#include "mfg/simd/kernels.hpp"

namespace mfg::simd {

#if defined(MFG_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

bool available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(MFG_HAVE_AVX2)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
#if defined(MFG_HAVE_AVX2)
  if (isa == Isa::Avx2 && available(Isa::Avx2)) return avx2_table();
#endif
  (void)isa;
  return scalar_table();
}

namespace {
Isa select_isa() {
  if (const char* env = std::getenv("MFG_SIMD"); env != nullptr && std::string_view(env) == "scalar")
    return Isa::Scalar;
  return available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}
}  // namespace

Isa active_isa() {
  static const Isa isa = select_isa();
  return isa;
}

const KernelTable& active() {
  static const KernelTable& t = table(active_isa());
  return t;
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

}  // namespace mfg::simd
