// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/layers.hpp"

#include <cmath>
#include <string>

namespace fraudtext {

SequenceBatch SequenceBatch::from_steps(const std::vector<Matrix>& steps) {
  if (steps.empty()) return {};
  SequenceBatch seq(steps.front().rows(), static_cast<Index>(steps.size()), steps.front().cols());
  for (Index t = 0; t < seq.steps; ++t) {
    const Matrix& m = steps[static_cast<std::size_t>(t)];
    if (m.rows() != seq.batch || m.cols() != seq.features()) {
      throw ShapeError("sequence step " + std::to_string(t) + " is " + shape_string(m) +
                       ", expected " + shape_string(seq.batch, seq.features()));
    }
    seq.step(t) = m;
  }
  return seq;
}

void check_token_range(const TokenMatrix& tokens, Index vocab_rows) {
  for (Index b = 0; b < tokens.rows(); ++b) {
    for (Index t = 0; t < tokens.cols(); ++t) {
      const auto tok = tokens(b, t);
      if (tok < 0 || tok >= vocab_rows) {
        throw IndexError("embedding: token " + std::to_string(tok) + " at row " +
                         std::to_string(b) + ", position " + std::to_string(t) +
                         " is outside [0, " + std::to_string(vocab_rows) + ")");
      }
    }
  }
}

EmbeddingForward embedding_forward(const TokenMatrix& tokens, const EmbeddingParams& p) {
  check_token_range(tokens, p.table.rows());
  EmbeddingForward fwd;
  fwd.out = SequenceBatch(tokens.rows(), tokens.cols(), p.table.cols());
  for (Index t = 0; t < tokens.cols(); ++t) {
    for (Index b = 0; b < tokens.rows(); ++b) {
      fwd.out.data.row(t * tokens.rows() + b) = p.table.row(tokens(b, t));
    }
  }
  fwd.cache.tokens = tokens;
  return fwd;
}

Matrix embedding_backward(const EmbeddingCache& cache, const SequenceBatch& grad_out,
                          Index vocab_rows) {
  const TokenMatrix& tokens = cache.tokens;
  if (grad_out.batch != tokens.rows() || grad_out.steps != tokens.cols()) {
    throw ShapeError("embedding_backward: gradient covers " +
                     shape_string(grad_out.batch, grad_out.steps) + " positions, tokens are " +
                     shape_string(tokens));
  }
  Matrix grad = Matrix::Zero(vocab_rows, grad_out.features());
  for (Index t = 0; t < tokens.cols(); ++t) {
    for (Index b = 0; b < tokens.rows(); ++b) {
      grad.row(tokens(b, t)) += grad_out.data.row(t * tokens.rows() + b);
    }
  }
  return grad;
}

Matrix embedding_flat_forward(const TokenMatrix& tokens, const EmbeddingParams& p) {
  check_token_range(tokens, p.table.rows());
  const Index d = p.table.cols();
  Matrix out(tokens.rows(), tokens.cols() * d);
  for (Index b = 0; b < tokens.rows(); ++b) {
    for (Index t = 0; t < tokens.cols(); ++t) out.row(b).segment(t * d, d) = p.table.row(tokens(b, t));
  }
  return out;
}

Matrix embedding_flat_backward(const TokenMatrix& tokens, const Matrix& grad_flat,
                               Index vocab_rows) {
  const Index d = tokens.cols() > 0 ? grad_flat.cols() / tokens.cols() : 0;
  if (grad_flat.rows() != tokens.rows() || grad_flat.cols() != tokens.cols() * d) {
    throw ShapeError("embedding_flat_backward: gradient " + shape_string(grad_flat) +
                     " does not match tokens " + shape_string(tokens));
  }
  // Same accumulation order as embedding_backward after flatten_backward.
  Matrix grad = Matrix::Zero(vocab_rows, d);
  for (Index t = 0; t < tokens.cols(); ++t) {
    for (Index b = 0; b < tokens.rows(); ++b) grad.row(tokens(b, t)) += grad_flat.row(b).segment(t * d, d);
  }
  return grad;
}

DenseForward dense_forward(Matrix x, const DenseParams& p, Activation activation) {
  if (x.cols() != p.weights.rows()) {
    throw ShapeError("dense: input " + shape_string(x) + " does not match weights " +
                     shape_string(p.weights));
  }
  DenseForward fwd;
  fwd.out = map_activation(add_row(matmul(x, p.weights), p.bias), activation);
  fwd.cache.input = std::move(x);
  fwd.cache.output = fwd.out;
  fwd.cache.activation = activation;
  return fwd;
}

DenseGrads dense_backward(const DenseCache& cache, const DenseParams& p, const Matrix& grad_out) {
  if (grad_out.rows() != cache.output.rows() || grad_out.cols() != cache.output.cols()) {
    throw ShapeError("dense_backward: gradient " + shape_string(grad_out) + " vs output " +
                     shape_string(cache.output));
  }
  const Matrix dz =
      grad_out.cwiseProduct(activation_grad_from_output(cache.output, cache.activation));
  DenseGrads g;
  g.weights = matmul_tn(cache.input, dz);
  g.bias = column_sums(dz);
  g.input = matmul(dz, p.weights.transpose());
  return g;
}

FlattenForward flatten_forward(const SequenceBatch& x) {
  FlattenForward fwd;
  fwd.cache = {x.batch, x.steps, x.features()};
  const Index d = x.features();
  fwd.out.resize(x.batch, x.steps * d);
  for (Index b = 0; b < x.batch; ++b) {
    for (Index t = 0; t < x.steps; ++t) {
      fwd.out.row(b).segment(t * d, d) = x.data.row(t * x.batch + b);
    }
  }
  return fwd;
}

SequenceBatch flatten_backward(const FlattenCache& cache, const Matrix& grad_out) {
  if (grad_out.rows() != cache.batch || grad_out.cols() != cache.steps * cache.features) {
    throw ShapeError("flatten_backward: gradient " + shape_string(grad_out) + " vs " +
                     shape_string(cache.batch, cache.steps * cache.features));
  }
  SequenceBatch dx(cache.batch, cache.steps, cache.features);
  const Index d = cache.features;
  for (Index b = 0; b < cache.batch; ++b) {
    for (Index t = 0; t < cache.steps; ++t) {
      dx.data.row(t * cache.batch + b) = grad_out.row(b).segment(t * d, d);
    }
  }
  return dx;
}

DropoutForward dropout_forward(const Matrix& x, double rate, SeededRng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout: rate " + std::to_string(rate) + " is outside [0, 1)");
  }
  DropoutForward fwd;
  if (!training || rate == 0.0) {
    fwd.out = x;
    return fwd;
  }
  const double scale = 1.0 / (1.0 - rate);
  fwd.cache.mask.resize(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    fwd.cache.mask.data()[i] = rng.uniform() < rate ? 0.0 : scale;
  }
  fwd.out = x.cwiseProduct(fwd.cache.mask);
  return fwd;
}

Matrix dropout_backward(const DropoutCache& cache, const Matrix& grad_out) {
  if (cache.mask.size() == 0) return grad_out;
  if (grad_out.rows() != cache.mask.rows() || grad_out.cols() != cache.mask.cols()) {
    throw ShapeError("dropout_backward: gradient " + shape_string(grad_out) + " vs mask " +
                     shape_string(cache.mask));
  }
  return grad_out.cwiseProduct(cache.mask);
}

BatchNormForward batchnorm_forward(const Matrix& x, const BatchNormParams& p,
                                   const RunningStats& running, const BatchNormConfig& cfg,
                                   bool training) {
  const Index n = x.rows();
  const Index d = x.cols();
  if (p.gamma.rows() != 1 || p.gamma.cols() != d || p.beta.rows() != 1 || p.beta.cols() != d) {
    throw ShapeError("batchnorm: input " + shape_string(x) + " vs gamma " +
                     shape_string(p.gamma) + ", beta " + shape_string(p.beta));
  }
  BatchNormForward fwd;
  fwd.cache.training = training;
  Matrix mean;
  Matrix variance;
  if (training) {
    if (n < 2) {
      throw DataError("batchnorm: training needs a batch of at least 2 rows, got " +
                      std::to_string(n));
    }
    mean = column_sums(x) / static_cast<double>(n);
    const Matrix centered = x.rowwise() - mean.row(0);
    variance = column_sums(centered.cwiseAbs2()) / static_cast<double>(n);
    fwd.running.mean = cfg.momentum * running.mean + (1.0 - cfg.momentum) * mean;
    fwd.running.variance = cfg.momentum * running.variance + (1.0 - cfg.momentum) * variance;
  } else {
    mean = running.mean;
    variance = running.variance;
    fwd.running = running;
  }
  fwd.cache.inv_std = (variance.array() + cfg.epsilon).rsqrt().matrix();
  fwd.cache.normalized =
      ((x.rowwise() - mean.row(0)).array().rowwise() * fwd.cache.inv_std.array().row(0)).matrix();
  fwd.out = ((fwd.cache.normalized.array().rowwise() * p.gamma.array().row(0)).rowwise() +
             p.beta.array().row(0))
                .matrix();
  return fwd;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                  const Matrix& grad_out) {
  const Matrix& xhat = cache.normalized;
  if (grad_out.rows() != xhat.rows() || grad_out.cols() != xhat.cols()) {
    throw ShapeError("batchnorm_backward: gradient " + shape_string(grad_out) + " vs " +
                     shape_string(xhat));
  }
  BatchNormGrads g;
  g.beta = column_sums(grad_out);
  g.gamma = column_sums(grad_out.cwiseProduct(xhat));
  const Eigen::Array<double, 1, Eigen::Dynamic> scale =
      p.gamma.array().row(0) * cache.inv_std.array().row(0);
  if (!cache.training) {
    g.input = (grad_out.array().rowwise() * scale).matrix();
    return g;
  }
  const double n = static_cast<double>(xhat.rows());
  // dx = gamma * inv_std / n * (n * dy - sum(dy) - xhat * sum(dy * xhat))
  ArrayRM centered = n * grad_out.array();
  centered.rowwise() -= g.beta.array().row(0);
  centered -= xhat.array().rowwise() * g.gamma.array().row(0);
  g.input = ((centered.rowwise() * scale) / n).matrix();
  return g;
}

}  // namespace fraudtext
