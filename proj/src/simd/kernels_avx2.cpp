// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "kli/simd/kernels.hpp"

#include <immintrin.h>

#include <cfloat>
#include <cmath>

namespace kli::simd {
namespace {

// Natural log of four positive normal doubles.
//
// x = m * 2^e with m in [sqrt(1/2), sqrt(2)); ln m = 2 atanh(s) with
// s = (m - 1) / (m + 1), |s| <= 0.1716, expanded to the z^12 term
// (truncation below 1e-19). ln 2 is split hi/lo so e * ln2_hi is exact.
inline __m256d log4(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);

  const __m256i biased = _mm256_srli_epi64(bits, 52);
  const __m256d two52 = _mm256_castsi256_pd(_mm256_set1_epi64x(0x4330000000000000LL));
  __m256d e = _mm256_sub_pd(_mm256_or_pd(_mm256_castsi256_pd(biased), two52),
                            _mm256_set1_pd(4503599627370496.0 + 1023.0));

  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));

  const __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(1.4142135623730951), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  e = _mm256_add_pd(e, _mm256_and_pd(big, _mm256_set1_pd(1.0)));

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d z = _mm256_mul_pd(s, s);

  __m256d r = _mm256_set1_pd(1.0 / 25.0);
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 23.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 21.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 19.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 17.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 15.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 13.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 11.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 9.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 7.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 5.0));
  r = _mm256_fmadd_pd(r, z, _mm256_set1_pd(1.0 / 3.0));
  // 2 s (1 + z R') written as 2s + 2s*z*R' to keep the leading term exact.
  const __m256d two_s = _mm256_add_pd(s, s);
  const __m256d log_m = _mm256_fmadd_pd(_mm256_mul_pd(two_s, z), r, two_s);

  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  return _mm256_fmadd_pd(e, ln2_hi, _mm256_fmadd_pd(e, ln2_lo, log_m));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
}

double kl_sum_avx2(const double* p, const double* q, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d lo_limit = _mm256_set1_pd(DBL_MIN);
  const __m256d hi_limit = _mm256_set1_pd(DBL_MAX);
  __m256d acc = zero;
  double tail = 0.0;
  std::size_t v = 0;
  for (; v + 4 <= n; v += 4) {
    const __m256d pv = _mm256_loadu_pd(p + v);
    const __m256d qv = _mm256_loadu_pd(q + v);
    const __m256d live = _mm256_cmp_pd(pv, zero, _CMP_NEQ_OQ);
    const __m256d ratio = _mm256_blendv_pd(one, _mm256_div_pd(pv, qv), live);
    const __m256d in_range =
        _mm256_and_pd(_mm256_cmp_pd(ratio, lo_limit, _CMP_GE_OQ),
                      _mm256_cmp_pd(ratio, hi_limit, _CMP_LE_OQ));
    if (_mm256_movemask_pd(in_range) != 0xF) {
      // Subnormal or overflowing ratio: the vector log is not valid there.
      for (std::size_t i = v; i < v + 4; ++i) {
        if (p[i] != 0.0) tail += p[i] * std::log(p[i] / q[i]);
      }
      continue;
    }
    acc = _mm256_fmadd_pd(pv, log4(ratio), acc);
  }
  for (; v < n; ++v) {
    if (p[v] != 0.0) tail += p[v] * std::log(p[v] / q[v]);
  }
  return hsum(acc) + tail;
}

void blend_avx2(double* out, const double* f, const double* g, double lambda,
                std::size_t n) {
  const double keep = 1.0 - lambda;
  const __m256d kv = _mm256_set1_pd(keep);
  const __m256d lv = _mm256_set1_pd(lambda);
  std::size_t v = 0;
  for (; v + 4 <= n; v += 4) {
    const __m256d mixed = _mm256_fmadd_pd(kv, _mm256_loadu_pd(f + v),
                                          _mm256_mul_pd(lv, _mm256_loadu_pd(g + v)));
    _mm256_storeu_pd(out + v, mixed);
  }
  for (; v < n; ++v) out[v] = keep * f[v] + lambda * g[v];
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void scale_by_lookup_avx2(double* out, const std::uint32_t* index,
                          const double* table, std::size_t n) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(index + j));
    const __m256d factors = _mm256_i32gather_pd(table, idx, 8);
    _mm256_storeu_pd(out + j, _mm256_mul_pd(_mm256_loadu_pd(out + j), factors));
  }
  for (; j < n; ++j) out[j] *= table[index[j]];
}

void log_avx2(double* out, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, log4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = std::log(x[i]);
}

}  // namespace

const Kernels& avx2_kernels() {
  static const Kernels k{"avx2", kl_sum_avx2, blend_avx2, dot_avx2,
                         scale_by_lookup_avx2, log_avx2};
  return k;
}

}  // namespace kli::simd
