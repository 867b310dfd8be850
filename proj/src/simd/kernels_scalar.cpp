#include "kli/simd/kernels.hpp"

#include <cmath>

namespace kli::simd {
namespace {

double kl_sum_scalar(const double* p, const double* q, std::size_t n) {
  double acc = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    if (p[v] == 0.0) continue;
    acc += p[v] * std::log(p[v] / q[v]);
  }
  return acc;
}

void blend_scalar(double* out, const double* f, const double* g, double lambda,
                  std::size_t n) {
  const double keep = 1.0 - lambda;
  for (std::size_t v = 0; v < n; ++v) out[v] = keep * f[v] + lambda * g[v];
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void scale_by_lookup_scalar(double* out, const std::uint32_t* index,
                            const double* table, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) out[j] *= table[index[j]];
}

void log_scalar(double* out, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}

}  // namespace

const Kernels& scalar() {
  static const Kernels k{"scalar", kl_sum_scalar, blend_scalar, dot_scalar,
                         scale_by_lookup_scalar, log_scalar};
  return k;
}

}  // namespace kli::simd
