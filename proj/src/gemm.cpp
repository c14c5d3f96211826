// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <type_traits>

#if defined(__AVX512F__) || (defined(__AVX2__) && defined(__FMA__))
#include <immintrin.h>
#endif

#include "fraudtext/tensor.hpp"

namespace fraudtext {

std::string shape_string(Index rows, Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

namespace detail {
namespace {

// One output element; used for edges the vector kernels do not cover.
inline void dot_chain(const double* a, Index a_cs, const double* b, Index ldb, Index k, double* c,
                      bool seeded) {
  double acc = seeded ? *c : 0.0;
  for (Index p = 0; p < k; ++p) acc = std::fma(a[p * a_cs], b[p * ldb], acc);
  *c = acc;
}

#if defined(__AVX512F__)
constexpr Index kLanes = 8;
using Vec = __m512d;
inline Vec vzero() { return _mm512_setzero_pd(); }
inline Vec vload(const double* p) { return _mm512_loadu_pd(p); }
inline void vstore(double* p, Vec v) { _mm512_storeu_pd(p, v); }
inline Vec vbroadcast(double x) { return _mm512_set1_pd(x); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm512_fmadd_pd(a, b, c); }
#define FRAUDTEXT_VECTOR_GEMM 1
#elif defined(__AVX2__) && defined(__FMA__)
constexpr Index kLanes = 4;
using Vec = __m256d;
inline Vec vzero() { return _mm256_setzero_pd(); }
inline Vec vload(const double* p) { return _mm256_loadu_pd(p); }
inline void vstore(double* p, Vec v) { _mm256_storeu_pd(p, v); }
inline Vec vbroadcast(double x) { return _mm256_set1_pd(x); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm256_fmadd_pd(a, b, c); }
#define FRAUDTEXT_VECTOR_GEMM 1
#endif

// Panel sizes: a kKc x kNc slice of b (1 MiB) stays in L2 while every row
// tile of a streams past it.
constexpr Index kKc = 256;
constexpr Index kNc = 512;

#ifdef FRAUDTEXT_VECTOR_GEMM
constexpr Index kRows = 6;
constexpr Index kVecs = 2;
constexpr Index kCols = kVecs * kLanes;

inline Vec vseed(const double* c, bool seeded) { return seeded ? vload(c) : vzero(); }

// Rows x kVecs register tile over k inner steps.
template <Index Rows>
inline void tile_full(Index k, const double* a, Index a_rs, Index a_cs, const double* b, Index ldb,
                      double* c, Index ldc, bool seeded) {
  Vec acc[Rows][kVecs];
#pragma GCC unroll 16
  for (Index r = 0; r < Rows; ++r) {
#pragma GCC unroll 16
    for (Index v = 0; v < kVecs; ++v) acc[r][v] = vseed(c + r * ldc + v * kLanes, seeded);
  }
  for (Index p = 0; p < k; ++p) {
    const double* brow = b + p * ldb;
    const Index ap = p * a_cs;
    Vec bv[kVecs];
#pragma GCC unroll 16
    for (Index v = 0; v < kVecs; ++v) bv[v] = vload(brow + v * kLanes);
#pragma GCC unroll 16
    for (Index r = 0; r < Rows; ++r) {
      const Vec x = vbroadcast(a[r * a_rs + ap]);
#pragma GCC unroll 16
      for (Index v = 0; v < kVecs; ++v) acc[r][v] = vfma(x, bv[v], acc[r][v]);
    }
  }
#pragma GCC unroll 16
  for (Index r = 0; r < Rows; ++r) {
#pragma GCC unroll 16
    for (Index v = 0; v < kVecs; ++v) vstore(c + r * ldc + v * kLanes, acc[r][v]);
  }
}

// 1 x (1 vector) tile for ragged edges.
inline void tile_1x1(Index k, const double* a, Index a_cs, const double* b, Index ldb, double* c,
                     bool seeded) {
  Vec acc = vseed(c, seeded);
  for (Index p = 0; p < k; ++p) acc = vfma(vbroadcast(a[p * a_cs]), vload(b + p * ldb), acc);
  vstore(c, acc);
}

// Rows rows of c, columns [0, n).
template <Index Rows>
void row_panel(Index n, Index k, const double* a, Index a_rs, Index a_cs, const double* b,
               Index ldb, double* c, Index ldc, bool seeded) {
  Index j = 0;
  for (; j + kCols <= n; j += kCols) tile_full<Rows>(k, a, a_rs, a_cs, b + j, ldb, c + j, ldc, seeded);
  for (; j + kLanes <= n; j += kLanes) {
    for (Index r = 0; r < Rows; ++r) {
      tile_1x1(k, a + r * a_rs, a_cs, b + j, ldb, c + r * ldc + j, seeded);
    }
  }
  for (; j < n; ++j) {
    for (Index r = 0; r < Rows; ++r) {
      dot_chain(a + r * a_rs, a_cs, b + j, ldb, k, c + r * ldc + j, seeded);
    }
  }
}

void block_kernel(Index m, Index n, Index k, const double* a, Index a_rs, Index a_cs,
                  const double* b, Index ldb, double* c, Index ldc, bool seeded) {
  Index i = 0;
  for (; i + kRows <= m; i += kRows) {
    row_panel<kRows>(n, k, a + i * a_rs, a_rs, a_cs, b, ldb, c + i * ldc, ldc, seeded);
  }
  const auto rest = [&](auto rows) {
    constexpr Index r = decltype(rows)::value;
    for (; i + r <= m; i += r) {
      row_panel<r>(n, k, a + i * a_rs, a_rs, a_cs, b, ldb, c + i * ldc, ldc, seeded);
    }
  };
  rest(std::integral_constant<Index, 4>{});
  rest(std::integral_constant<Index, 2>{});
  rest(std::integral_constant<Index, 1>{});
}
#else
void block_kernel(Index m, Index n, Index k, const double* a, Index a_rs, Index a_cs,
                  const double* b, Index ldb, double* c, Index ldc, bool seeded) {
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      dot_chain(a + i * a_rs, a_cs, b + j, ldb, k, c + i * ldc + j, seeded);
    }
  }
}
#endif

}  // namespace

template <>
void gemm<double>(Index m, Index n, Index k, const double* a, Index a_rs, Index a_cs,
                  const double* b, Index ldb, double* c, Index ldc, bool accumulate) {
  if (k == 0) {
    if (!accumulate) {
      for (Index i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
    }
    return;
  }
  for (Index jc = 0; jc < n; jc += kNc) {
    const Index nc = std::min(kNc, n - jc);
    for (Index pc = 0; pc < k; pc += kKc) {
      const Index kc = std::min(kKc, k - pc);
      block_kernel(m, nc, kc, a + pc * a_cs, a_rs, a_cs, b + pc * ldb + jc, ldb, c + jc, ldc,
                   accumulate || pc > 0);
    }
  }
}

}  // namespace detail
}  // namespace fraudtext
