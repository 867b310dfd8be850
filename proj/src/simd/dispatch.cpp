#include "kli/simd/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace kli::simd {

#if defined(KLI_HAVE_AVX2)
const Kernels& avx2_kernels();
#endif

const Kernels* avx2() {
#if defined(KLI_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &avx2_kernels() : nullptr;
#else
  return nullptr;
#endif
}

const Kernels& active() {
  static const Kernels& chosen = []() -> const Kernels& {
    const char* env = std::getenv("KLI_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar();
    if (const Kernels* k = avx2()) return *k;
    return scalar();
  }();
  return chosen;
}

}  // namespace kli::simd
