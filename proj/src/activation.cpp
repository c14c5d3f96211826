// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cmath>
#include <cstdint>

#if defined(__AVX512F__) || (defined(__AVX2__) && defined(__FMA__))
#include <immintrin.h>
#endif

#include "fraudtext/tensor.hpp"

// exp(x) = 2^k * p(r), r = x - k ln2, |r| <= ln2 / 2, p the degree-13 Taylor
// polynomial. The scalar and vector paths perform the same IEEE operations
// in the same order, so every element is rounded identically whichever path
// handles it.

namespace fraudtext::detail {
namespace {

constexpr double kLog2e = 1.4426950408889634;
constexpr double kLn2Hi = 0.6931471803691238;     // 0x3FE62E42FEE00000
constexpr double kLn2Lo = 1.9082149292705877e-10;
constexpr double kRound = 6755399441055744.0;     // 1.5 * 2^52
constexpr double kBias = kRound + 1023.0;
constexpr double kLow = -746.0;
constexpr double kHigh = 710.0;
constexpr double kCoef[14] = {1.0,
                              1.0,
                              1.0 / 2,
                              1.0 / 6,
                              1.0 / 24,
                              1.0 / 120,
                              1.0 / 720,
                              1.0 / 5040,
                              1.0 / 40320,
                              1.0 / 362880,
                              1.0 / 3628800,
                              1.0 / 39916800,
                              1.0 / 479001600,
                              1.0 / 6227020800.0};

inline double pow2(double k) {
  return std::bit_cast<double>(std::bit_cast<std::uint64_t>(k + kBias) << 52);
}

inline double exp_scalar(double x) {
  x = kLow > x ? kLow : x;  // NaN passes through both
  x = kHigh < x ? kHigh : x;
  const double k = (x * kLog2e + kRound) - kRound;
  double r = std::fma(-k, kLn2Hi, x);
  r = std::fma(-k, kLn2Lo, r);
  double p = kCoef[13];
  for (int i = 12; i >= 0; --i) p = std::fma(p, r, kCoef[i]);
  const double k1 = std::floor(k * 0.5);
  return (p * pow2(k1)) * pow2(k - k1);
}

#if defined(__AVX512F__)
constexpr int kWidth = 8;
using V = __m512d;
inline V set1(double x) { return _mm512_set1_pd(x); }
inline V load(const double* p) { return _mm512_loadu_pd(p); }
inline void store(double* p, V v) { _mm512_storeu_pd(p, v); }
inline V add(V a, V b) { return _mm512_add_pd(a, b); }
inline V sub(V a, V b) { return _mm512_sub_pd(a, b); }
inline V mul(V a, V b) { return _mm512_mul_pd(a, b); }
inline V div(V a, V b) { return _mm512_div_pd(a, b); }
inline V fma(V a, V b, V c) { return _mm512_fmadd_pd(a, b, c); }
inline V fnma(V a, V b, V c) { return _mm512_fnmadd_pd(a, b, c); }
inline V vmax(V a, V b) { return _mm512_max_pd(a, b); }
inline V vmin(V a, V b) { return _mm512_min_pd(a, b); }
inline V vfloor(V a) { return _mm512_roundscale_pd(a, _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC); }
inline V vneg_abs(V x) { return _mm512_castsi512_pd(_mm512_or_si512(_mm512_castpd_si512(x), _mm512_set1_epi64(std::int64_t(1) << 63))); }
inline V select_nonnegative(V x, V yes, V no) {
  return _mm512_mask_blend_pd(_mm512_cmp_pd_mask(x, _mm512_setzero_pd(), _CMP_GE_OQ), no, yes);
}
inline V pow2v(V k) {
  return _mm512_castsi512_pd(_mm512_slli_epi64(_mm512_castpd_si512(add(k, set1(kBias))), 52));
}
#define FRAUDTEXT_VECTOR_EXP 1
#elif defined(__AVX2__) && defined(__FMA__)
constexpr int kWidth = 4;
using V = __m256d;
inline V set1(double x) { return _mm256_set1_pd(x); }
inline V load(const double* p) { return _mm256_loadu_pd(p); }
inline void store(double* p, V v) { _mm256_storeu_pd(p, v); }
inline V add(V a, V b) { return _mm256_add_pd(a, b); }
inline V sub(V a, V b) { return _mm256_sub_pd(a, b); }
inline V mul(V a, V b) { return _mm256_mul_pd(a, b); }
inline V div(V a, V b) { return _mm256_div_pd(a, b); }
inline V fma(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
inline V fnma(V a, V b, V c) { return _mm256_fnmadd_pd(a, b, c); }
inline V vmax(V a, V b) { return _mm256_max_pd(a, b); }
inline V vmin(V a, V b) { return _mm256_min_pd(a, b); }
inline V vfloor(V a) { return _mm256_floor_pd(a); }
inline V vneg_abs(V x) { return _mm256_or_pd(x, _mm256_set1_pd(-0.0)); }
inline V select_nonnegative(V x, V yes, V no) {
  return _mm256_blendv_pd(no, yes, _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_GE_OQ));
}
inline V pow2v(V k) {
  return _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_castpd_si256(add(k, set1(kBias))), 52));
}
#define FRAUDTEXT_VECTOR_EXP 1
#endif

#ifdef FRAUDTEXT_VECTOR_EXP
inline V exp_vector(V x) {
  // max/min return the second operand on NaN, matching the scalar selects.
  x = vmax(set1(kLow), x);
  x = vmin(set1(kHigh), x);
  const V round = set1(kRound);
  const V k = sub(add(mul(x, set1(kLog2e)), round), round);
  V r = fnma(k, set1(kLn2Hi), x);
  r = fnma(k, set1(kLn2Lo), r);
  V p = set1(kCoef[13]);
  for (int i = 12; i >= 0; --i) p = fma(p, r, set1(kCoef[i]));
  const V k1 = vfloor(mul(k, set1(0.5)));
  return mul(mul(p, pow2v(k1)), pow2v(sub(k, k1)));
}
#endif

// f(e) applied to e = exp(scale * x).
template <typename Scalar, typename Vector>
void map_exp(const double* in, double* out, Index n, double scale, Scalar finish,
             [[maybe_unused]] Vector finish_vector) {
  Index i = 0;
#ifdef FRAUDTEXT_VECTOR_EXP
  const V s = set1(scale);
  for (; i + kWidth <= n; i += kWidth) store(out + i, finish_vector(exp_vector(mul(s, load(in + i)))));
#endif
  for (; i < n; ++i) out[i] = finish(exp_scalar(scale * in[i]));
}

}  // namespace

double exp_value(double x) { return exp_scalar(x); }

void exp_span(const double* in, double* out, Index n) {
  map_exp(
      in, out, n, 1.0, [](double e) { return e; },
      [](auto e) { return e; });
}

void sigmoid_span(const double* in, double* out, Index n) {
  // Branch form: e = exp(-|x|), then 1 / (1 + e) for x >= 0 and e / (1 + e)
  // otherwise, so exp never sees a large positive argument.
  Index i = 0;
#ifdef FRAUDTEXT_VECTOR_EXP
  const V one = set1(1.0);
  for (; i + kWidth <= n; i += kWidth) {
    const V x = load(in + i);
    const V e = exp_vector(vneg_abs(x));
    store(out + i, div(select_nonnegative(x, one, e), add(one, e)));
  }
#endif
  for (; i < n; ++i) {
    const double x = in[i];
    const double e = exp_scalar(-std::abs(x));
    out[i] = (x >= 0.0 ? 1.0 : e) / (1.0 + e);
  }
}

void tanh_span(const double* in, double* out, Index n) {
  map_exp(
      in, out, n, 2.0, [](double e) { return 1.0 - 2.0 / (1.0 + e); },
      [](auto e) {
#ifdef FRAUDTEXT_VECTOR_EXP
        const V one = set1(1.0);
        return sub(one, div(set1(2.0), add(one, e)));
#else
        return e;
#endif
      });
}

}  // namespace fraudtext::detail
