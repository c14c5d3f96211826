// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>

#include "fraudtext/error.hpp"
#include "fraudtext/rng.hpp"

namespace fraudtext {

using Index = Eigen::Index;

/// Dense row-major matrix; the only numeric container used by the library.
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = MatrixT<double>;

/// Row-major dynamic array, for coefficient-wise expressions over Matrix data.
using ArrayRM = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Token ids, one row per sentence.
using TokenMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { none, sigmoid, tanh, relu };
enum class Elementwise { add, sub, mul };

std::string shape_string(Index rows, Index cols);

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

namespace detail {

/**
 * c (+)= a * b. a is addressed as a[i * a_rs + p * a_cs] so transposed
 * operands need no copy; b and c are row-major with strides ldb and ldc.
 *
 * Each output element is the fused multiply-add chain
 *   fma(a[i][k-1], b[k-1][j], ... fma(a[i][0], b[0][j], c0))
 * evaluated in increasing p, where c0 is 0, or the prior value of c when
 * `accumulate` is set. Vector kernels only widen across j and cache blocking
 * only splits the chain at stored intermediate values, so every element sees
 * exactly this sequence of correctly rounded operations on any instruction
 * set.
 */
template <typename Scalar>
void gemm(Index m, Index n, Index k, const Scalar* a, Index a_rs, Index a_cs, const Scalar* b,
          Index ldb, Scalar* c, Index ldc, bool accumulate) {
  for (Index i = 0; i < m; ++i) {
    Scalar* crow = c + i * ldc;
    if (!accumulate) {
      for (Index j = 0; j < n; ++j) crow[j] = Scalar(0);
    }
    for (Index p = 0; p < k; ++p) {
      const Scalar av = a[i * a_rs + p * a_cs];
      const Scalar* brow = b + p * ldb;
      for (Index j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

template <>
void gemm<double>(Index m, Index n, Index k, const double* a, Index a_rs, Index a_cs,
                  const double* b, Index ldb, double* c, Index ldc, bool accumulate);

inline void check_product(Index a_rows, Index a_cols, Index b_rows, Index b_cols, Index out_rows,
                   Index out_cols) {
  if (a_cols != b_rows) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a_rows, a_cols) + " by " +
                     shape_string(b_rows, b_cols));
  }
  if (out_rows != a_rows || out_cols != b_cols) {
    throw ShapeError("matmul: output is " + shape_string(out_rows, out_cols) + ", expected " +
                     shape_string(a_rows, b_cols));
  }
}

}  // namespace detail

/// out = a * b, written into an existing row-major block (rows must not alias).
/// With `accumulate`, out += a * b with the chain seeded by out.
template <typename Scalar>
void matmul_into(const Eigen::Ref<const MatrixT<Scalar>>& a,
                 const Eigen::Ref<const MatrixT<Scalar>>& b, Eigen::Ref<MatrixT<Scalar>> out,
                 bool accumulate = false) {
  detail::check_product(a.rows(), a.cols(), b.rows(), b.cols(), out.rows(), out.cols());
  detail::gemm<Scalar>(a.rows(), b.cols(), a.cols(), a.data(), a.outerStride(), 1, b.data(),
                       b.outerStride(), out.data(), out.outerStride(), accumulate);
}

/// out = a^T * b without materialising the transpose.
template <typename Scalar>
void matmul_tn_into(const Eigen::Ref<const MatrixT<Scalar>>& a,
                    const Eigen::Ref<const MatrixT<Scalar>>& b, Eigen::Ref<MatrixT<Scalar>> out,
                    bool accumulate = false) {
  detail::check_product(a.cols(), a.rows(), b.rows(), b.cols(), out.rows(), out.cols());
  detail::gemm<Scalar>(a.cols(), b.cols(), a.rows(), a.data(), 1, a.outerStride(), b.data(),
                       b.outerStride(), out.data(), out.outerStride(), accumulate);
}

/// a^T * b; same reduction order as matmul(a.transpose(), b).
template <typename DerivedA, typename DerivedB>
MatrixT<typename DerivedA::Scalar> matmul_tn(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Eigen::Ref<const MatrixT<Scalar>> ra(a);
  const Eigen::Ref<const MatrixT<Scalar>> rb(b);
  MatrixT<Scalar> out(ra.cols(), rb.cols());
  matmul_tn_into<Scalar>(ra, rb, out);
  return out;
}

/// Matrix product with a fixed left-to-right reduction over the inner index.
/// Accepts any Eigen expression; non-contiguous operands (e.g. transposes)
/// are evaluated into a temporary first.
template <typename DerivedA, typename DerivedB>
MatrixT<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  static_assert(std::is_same_v<Scalar, typename DerivedB::Scalar>, "matmul: scalar types differ");
  const Eigen::Ref<const MatrixT<Scalar>> ra(a);
  const Eigen::Ref<const MatrixT<Scalar>> rb(b);
  detail::check_product(ra.rows(), ra.cols(), rb.rows(), rb.cols(), ra.rows(), rb.cols());
  MatrixT<Scalar> out(ra.rows(), rb.cols());
  matmul_into<Scalar>(ra, rb, out);
  return out;
}

template <typename DerivedA, typename DerivedB>
MatrixT<typename DerivedA::Scalar> elementwise(const Eigen::MatrixBase<DerivedA>& a,
                                               const Eigen::MatrixBase<DerivedB>& b,
                                               Elementwise op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("elementwise: shapes " + shape_string(a) + " and " + shape_string(b) +
                     " differ");
  }
  switch (op) {
    case Elementwise::add:
      return a + b;
    case Elementwise::sub:
      return a - b;
    case Elementwise::mul:
      return a.cwiseProduct(b);
  }
  return {};
}

/// x + row, with the 1 x cols row repeated for every row of x.
template <typename DerivedX, typename DerivedR>
MatrixT<typename DerivedX::Scalar> add_row(const Eigen::MatrixBase<DerivedX>& x,
                                           const Eigen::MatrixBase<DerivedR>& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("add_row: cannot broadcast " + shape_string(row) + " over " +
                     shape_string(x));
  }
  return x.rowwise() + row.row(0);
}

namespace detail {
/// exp with the same rounding on every code path; the span functions may
/// work in place (in == out).
double exp_value(double x);
void exp_span(const double* in, double* out, Index n);
void sigmoid_span(const double* in, double* out, Index n);
void tanh_span(const double* in, double* out, Index n);

template <typename Derived>
constexpr bool kSpanRows = std::is_same_v<typename Derived::Scalar, double> &&
                           bool(Derived::IsRowMajor) && Derived::InnerStrideAtCompileTime == 1;

template <typename Derived, typename Span, typename Expr>
void apply_inplace(const Eigen::DenseBase<Derived>& target, Span span, Expr expr) {
  auto& m = const_cast<Eigen::DenseBase<Derived>&>(target);
  if constexpr (kSpanRows<Derived>) {
    for (Index r = 0; r < m.rows(); ++r) {
      double* row = &m.derived().coeffRef(r, 0);
      span(row, row, m.cols());
    }
  } else {
    m = m.derived().unaryExpr(expr);
  }
}
}  // namespace detail

/**
 * Logistic sigmoid over a block, in place, in the two-branch stable form:
 * 1 / (1 + exp(-x)) for x >= 0 and exp(x) / (1 + exp(x)) for x < 0.
 */
template <typename Derived>
void sigmoid_inplace(const Eigen::DenseBase<Derived>& x) {
  using S = typename Derived::Scalar;
  detail::apply_inplace(x, detail::sigmoid_span, [](S v) {
    const S e = std::exp(-std::abs(v));
    return (v >= S(0) ? S(1) : e) / (S(1) + e);
  });
}

/// Hyperbolic tangent as 1 - 2 / (1 + exp(2x)), in place. Absolute error is
/// a few ulp.
template <typename Derived>
void tanh_inplace(const Eigen::DenseBase<Derived>& x) {
  using S = typename Derived::Scalar;
  detail::apply_inplace(x, detail::tanh_span,
                        [](S v) { return S(1) - S(2) / (S(1) + std::exp(S(2) * v)); });
}

template <typename Derived>
typename Derived::PlainObject sigmoid(const Eigen::ArrayBase<Derived>& x) {
  typename Derived::PlainObject out = x;
  sigmoid_inplace(out);
  return out;
}

template <typename Derived>
typename Derived::PlainObject tanh(const Eigen::ArrayBase<Derived>& x) {
  typename Derived::PlainObject out = x;
  tanh_inplace(out);
  return out;
}

template <typename Derived>
MatrixT<typename Derived::Scalar> map_activation(const Eigen::MatrixBase<Derived>& a,
                                                 Activation f) {
  using S = typename Derived::Scalar;
  switch (f) {
    case Activation::none:
      return a;
    case Activation::sigmoid:
      return sigmoid(a.array()).matrix();
    case Activation::tanh:
      return fraudtext::tanh(a.array()).matrix();
    case Activation::relu:
      return a.cwiseMax(S(0));
  }
  return {};
}

/// Derivative of f expressed through its output y = f(x).
template <typename Derived>
MatrixT<typename Derived::Scalar> activation_grad_from_output(const Eigen::MatrixBase<Derived>& y,
                                                              Activation f) {
  using S = typename Derived::Scalar;
  using M = MatrixT<S>;
  switch (f) {
    case Activation::none:
      return M::Ones(y.rows(), y.cols());
    case Activation::sigmoid:
      return (y.array() * (S(1) - y.array())).matrix();
    case Activation::tanh:
      return (S(1) - y.array().square()).matrix();
    case Activation::relu:
      return (y.array() > S(0)).template cast<S>().matrix();
  }
  return {};
}

/// Column sums accumulated top to bottom.
template <typename Derived>
MatrixT<typename Derived::Scalar> column_sums(const Eigen::MatrixBase<Derived>& x) {
  MatrixT<typename Derived::Scalar> out = MatrixT<typename Derived::Scalar>::Zero(1, x.cols());
  for (Index i = 0; i < x.rows(); ++i) out.row(0) += x.row(i);
  return out;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.derived().array().isFinite().all();
}

/// Glorot/Xavier uniform draw in [-sqrt(6/(rows+cols)), sqrt(6/(rows+cols))],
/// filled in row-major order.
template <typename Scalar = double>
MatrixT<Scalar> glorot_uniform(SeededRng& rng, Index rows, Index cols) {
  if (rows < 1 || cols < 1) {
    throw ParameterError("glorot_uniform: shape " + shape_string(rows, cols) + " is empty");
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  MatrixT<Scalar> out(rows, cols);
  for (Index i = 0; i < out.size(); ++i) {
    out.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
  }
  return out;
}

}  // namespace fraudtext
