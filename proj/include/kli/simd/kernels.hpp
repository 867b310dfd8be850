#pragma once

#include <cstdint>
#include <span>
#include <string_view>

// Data-parallel inner loops. Each kernel has a scalar reference version and,
// on x86-64, an AVX2+FMA version; `active()` picks one at first use based on
// the running CPU. Set KLI_SIMD=scalar in the environment to force the
// reference path.
//
// Kernels assume the caller has validated sizes; they do no checking.

namespace kli::simd {

struct Kernels {
  std::string_view name;

  // sum_v p[v] * ln(p[v] / q[v]); entries with p[v] == 0 contribute exactly 0.
  // Requires q[v] > 0 wherever p[v] > 0.
  double (*kl_sum)(const double* p, const double* q, std::size_t n);

  // out[v] = (1 - lambda) * f[v] + lambda * g[v]
  void (*blend)(double* out, const double* f, const double* g, double lambda,
                std::size_t n);

  double (*dot)(const double* a, const double* b, std::size_t n);

  // out[j] *= table[index[j]]
  void (*scale_by_lookup)(double* out, const std::uint32_t* index,
                          const double* table, std::size_t n);

  // ln(x[i]) for positive normal inputs.
  void (*log)(double* out, const double* x, std::size_t n);
};

const Kernels& scalar();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks
// AVX2/FMA.
const Kernels* avx2();

const Kernels& active();

}  // namespace kli::simd
