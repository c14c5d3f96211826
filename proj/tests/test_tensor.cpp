// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "fraudtext/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace fraudtext;
using fraudtext::testing::random_matrix;

namespace {

// Independent oracle: textbook triple loop, one fused multiply-add per term,
// accumulated left to right over k.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (Index k = 0; k < a.cols(); ++k) acc = std::fma(a(i, k), b(k, j), acc);
      c(i, j) = acc;
    }
  }
  return c;
}

Matrix from(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("matmul: identity and hand arithmetic") {
  const Matrix b = from({{5, 6}, {7, 8}});
  CHECK(matmul(Matrix::Identity(2, 2), b) == b);
  CHECK(matmul(from({{1, 2}, {3, 4}}), b) == from({{19, 22}, {43, 50}}));
}

TEST_CASE("matmul: bit-identical to the triple-loop oracle") {
  SeededRng rng(7);
  const Matrix a = random_matrix(rng, 7, 3);
  const Matrix b = random_matrix(rng, 3, 5);
  CHECK(matmul(a, b) == naive_matmul(a, b));

  // Shapes that exercise every tile edge of the vector kernel.
  for (Index m : {1, 3, 4, 5, 9, 17}) {
    for (Index n : {1, 7, 8, 15, 16, 33}) {
      for (Index k : {1, 2, 13, 64}) {
        const Matrix x = random_matrix(rng, m, k);
        const Matrix y = random_matrix(rng, k, n);
        CHECK(matmul(x, y) == naive_matmul(x, y));
      }
    }
  }
}

TEST_CASE("matmul: transposed and block operands") {
  SeededRng rng(8);
  const Matrix a = random_matrix(rng, 6, 4);
  const Matrix b = random_matrix(rng, 6, 5);
  const Matrix at = a.transpose();
  CHECK(matmul(a.transpose(), b) == naive_matmul(at, b));
  const Matrix w = random_matrix(rng, 4, 9);
  const Matrix w_left = w.leftCols(4);
  CHECK(matmul(a, w.leftCols(4)) == naive_matmul(a, w_left));
}

TEST_CASE("matmul: cache-blocked shapes, accumulate and transposed-left forms") {
  SeededRng rng(9);
  // k crosses two depth panels and n crosses a column panel.
  for (auto [m, k, n] : {std::tuple<Index, Index, Index>{7, 600, 1100}, {13, 257, 40}, {1, 513, 9}}) {
    const Matrix a = random_matrix(rng, m, k);
    const Matrix b = random_matrix(rng, k, n);
    CHECK(matmul(a, b) == naive_matmul(a, b));

    const Matrix seed = random_matrix(rng, m, n);
    Matrix acc = seed;
    matmul_into<double>(a, b, acc, true);
    const Matrix product = naive_matmul(a, b);
    Matrix expected(m, n);
    // The accumulate form continues the chain from the stored value.
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) {
        double v = seed(i, j);
        for (Index p = 0; p < k; ++p) v = std::fma(a(i, p), b(p, j), v);
        expected(i, j) = v;
      }
    }
    CHECK(acc == expected);
    CHECK(product.rows() == m);

    const Matrix at = a.transpose();
    CHECK(matmul_tn(at, b) == product);
  }
  CHECK_THROWS_AS(matmul_tn(Matrix::Zero(3, 2), Matrix::Zero(4, 2)), ShapeError);
}

TEST_CASE("matmul: shape error names both shapes") {
  try {
    (void)matmul(Matrix::Zero(2, 3), Matrix::Zero(2, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
  }
}

TEST_CASE("matmul: identity and distributivity properties") {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(rng, 8, 8);
    const Matrix b = random_matrix(rng, 8, 8);
    const Matrix c = random_matrix(rng, 8, 8);
    const Matrix a_copy = a;
    CHECK(matmul(a, Matrix::Identity(8, 8)) == a);
    CHECK(matmul(Matrix::Identity(8, 8), a) == a);
    const Matrix lhs = matmul(a, elementwise(b, c, Elementwise::add));
    const Matrix rhs = elementwise(matmul(a, b), matmul(a, c), Elementwise::add);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, lhs.cwiseAbs().maxCoeff()));
    CHECK(a == a_copy);
  }
}

TEST_CASE("elementwise") {
  SeededRng rng(3);
  const Matrix a = random_matrix(rng, 3, 4);
  CHECK(elementwise(a, Matrix::Zero(3, 4), Elementwise::add) == a);
  CHECK(elementwise(from({{2, 3}}), from({{4, 5}}), Elementwise::mul) == from({{8, 15}}));
  CHECK(elementwise(a, a, Elementwise::sub) == Matrix::Zero(3, 4));
  CHECK_THROWS_AS(elementwise(a, Matrix::Zero(4, 3), Elementwise::add), ShapeError);
}

TEST_CASE("activations") {
  CHECK(map_activation(from({{0.0}}), Activation::sigmoid)(0, 0) == 0.5);
  CHECK(map_activation(from({{0.0}}), Activation::tanh)(0, 0) == 0.0);
  CHECK(map_activation(from({{-2.0, 3.0}}), Activation::relu) == from({{0.0, 3.0}}));

  // exp(-1000) underflows; the stable form must give a tiny non-negative value
  // without NaN. The exact value ~ 5e-435 is below the double range, so the
  // oracle bound is the smallest subnormal ... 1e-300.
  const double tiny = map_activation(from({{-1000.0}}), Activation::sigmoid)(0, 0);
  CHECK(std::isfinite(tiny));
  CHECK(tiny >= 0.0);
  CHECK(tiny <= 1e-300);
  CHECK(map_activation(from({{1000.0}}), Activation::sigmoid)(0, 0) == 1.0);

  // Compare against the long-double reference on a grid.
  for (double x = -40.0; x <= 40.0; x += 0.37) {
    const long double ref_sig = 1.0L / (1.0L + std::exp(-static_cast<long double>(x)));
    const long double ref_tanh = std::tanh(static_cast<long double>(x));
    const Matrix in = from({{x}});
    CHECK(std::abs(map_activation(in, Activation::sigmoid)(0, 0) - static_cast<double>(ref_sig)) <=
          4e-16);
    CHECK(std::abs(map_activation(in, Activation::tanh)(0, 0) - static_cast<double>(ref_tanh)) <=
          4e-16);
  }
}

TEST_CASE("exp kernel: accuracy, range ends and lane independence") {
  SeededRng rng(21);
  for (int i = 0; i < 20000; ++i) {
    const double x = rng.uniform(-745.0, 709.7);
    const long double ref = std::exp(static_cast<long double>(x));
    const double got = detail::exp_value(x);
    if (ref < static_cast<long double>(std::numeric_limits<double>::min())) {
      // Subnormal results: absolute error within one subnormal step.
      CHECK(std::abs(static_cast<long double>(got) - ref) <=
            static_cast<long double>(std::numeric_limits<double>::denorm_min()));
    } else {
      CHECK(std::abs((static_cast<long double>(got) - ref) / ref) <= 4e-16L);
    }
  }
  CHECK(detail::exp_value(0.0) == 1.0);
  CHECK(detail::exp_value(1.0) == doctest::Approx(2.718281828459045).epsilon(1e-15));
  CHECK(std::isinf(detail::exp_value(710.0)));
  CHECK(std::isinf(detail::exp_value(std::numeric_limits<double>::infinity())));
  CHECK(detail::exp_value(-746.0) == 0.0);
  CHECK(detail::exp_value(-std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(std::isnan(detail::exp_value(std::numeric_limits<double>::quiet_NaN())));

  // Every element rounds the same whether it lands in a vector lane or the tail.
  std::vector<double> xs(37);
  for (double& x : xs) x = rng.uniform(-30.0, 30.0);
  std::vector<double> out(xs.size());
  detail::exp_span(xs.data(), out.data(), static_cast<Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(out[i] == detail::exp_value(xs[i]));
  for (std::size_t offset = 0; offset < 9; ++offset) {
    std::vector<double> shifted(xs.begin() + static_cast<std::ptrdiff_t>(offset), xs.end());
    detail::exp_span(shifted.data(), shifted.data(), static_cast<Index>(shifted.size()));
    for (std::size_t i = 0; i < shifted.size(); ++i) CHECK(shifted[i] == out[i + offset]);
  }
}

TEST_CASE("in-place activations on blocks match whole-matrix results") {
  SeededRng rng(22);
  const Matrix a = random_matrix(rng, 5, 19) * 8.0;
  Matrix m = a;
  sigmoid_inplace(m.middleCols(3, 11));
  tanh_inplace(m.leftCols(3));
  const Matrix sig = map_activation(a, Activation::sigmoid);
  const Matrix th = map_activation(a, Activation::tanh);
  CHECK(m.middleCols(3, 11) == sig.middleCols(3, 11));
  CHECK(m.leftCols(3) == th.leftCols(3));
  CHECK(m.rightCols(5) == a.rightCols(5));
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      const double x = a(i, j);
      const double e = detail::exp_value(-std::abs(x));
      CHECK(sig(i, j) == (x >= 0.0 ? 1.0 : e) / (1.0 + e));
    }
  }
}

TEST_CASE("glorot_uniform") {
  SeededRng a(99);
  SeededRng b(99);
  CHECK(glorot_uniform(a, 4, 6) == glorot_uniform(b, 4, 6));

  SeededRng rng(5);
  const Matrix m = glorot_uniform(rng, 3, 3);
  CHECK(m.cwiseAbs().maxCoeff() <= 1.0);

  const Matrix big = glorot_uniform(rng, 1, 100000);
  const double bound = std::sqrt(6.0 / 100001.0);
  CHECK(big.cwiseAbs().maxCoeff() <= bound);
  // Scaled to the unit interval so the tolerance is shape independent.
  CHECK(std::abs(big.mean() / bound) < 0.01);
  CHECK_THROWS_AS(glorot_uniform(rng, 0, 3), ParameterError);
}

TEST_CASE("SeededRng: reference stream and replay") {
  // xoshiro256** seeded through splitmix64; expected words come from an
  // independent Python transcription of the two reference algorithms.
  SeededRng zero(0);
  CHECK(zero.next_u64() == 0x99ec5f36cb75f2b4ULL);
  CHECK(zero.next_u64() == 0xbf6e1f784956452aULL);
  CHECK(zero.next_u64() == 0x1a5f849d4933e6e0ULL);
  SeededRng answer(42);
  CHECK(answer.next_u64() == 0x15780b2e0c2ec716ULL);
  CHECK(answer.next_u64() == 0x6104d9866d113a7eULL);
  CHECK(answer.next_u64() == 0xae17533239e499a1ULL);

  SeededRng rng(0);
  SeededRng replay(0);
  for (int i = 0; i < 1000; ++i) CHECK(rng.next_u64() == replay.next_u64());
  SeededRng other(1);
  SeededRng base(0);
  CHECK(other.next_u64() != base.next_u64());

  SeededRng r(12);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7);
  }
}
