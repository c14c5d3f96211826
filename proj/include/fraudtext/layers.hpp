// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "fraudtext/tensor.hpp"

namespace fraudtext {

/**
 * A batch of equal-length sequences stored time-major in one matrix:
 * rows [t * batch, (t + 1) * batch) hold the feature vectors of step t.
 * Stacking the steps lets whole-sequence products run as a single matmul.
 */
struct SequenceBatch {
  Index batch = 0;
  Index steps = 0;
  Matrix data;

  SequenceBatch() = default;
  SequenceBatch(Index batch_size, Index num_steps, Index features)
      : batch(batch_size), steps(num_steps), data(Matrix::Zero(batch_size * num_steps, features)) {}

  Index features() const { return data.cols(); }
  auto step(Index t) { return data.middleRows(t * batch, batch); }
  auto step(Index t) const { return data.middleRows(t * batch, batch); }

  /// Element [b][t][d] of the batch x steps x features view.
  double& at(Index b, Index t, Index d) { return data(t * batch + b, d); }
  double at(Index b, Index t, Index d) const { return data(t * batch + b, d); }

  /// Build from one batch x features matrix per step.
  static SequenceBatch from_steps(const std::vector<Matrix>& steps);
};

// ---------------------------------------------------------------- embedding

struct EmbeddingParams {
  Matrix table;  // vocab_rows x embedding_dim
};

struct EmbeddingCache {
  TokenMatrix tokens;
};

struct EmbeddingForward {
  SequenceBatch out;
  EmbeddingCache cache;
};

/// Throws IndexError if any token is outside [0, table.rows()).
void check_token_range(const TokenMatrix& tokens, Index vocab_rows);

EmbeddingForward embedding_forward(const TokenMatrix& tokens, const EmbeddingParams& p);

/// Gradient of the table; rows of repeated tokens accumulate.
Matrix embedding_backward(const EmbeddingCache& cache, const SequenceBatch& grad_out,
                          Index vocab_rows);

/// Embedding followed by flatten in one gather: row b holds the vectors of
/// tokens(b, 0), tokens(b, 1), ... side by side.
Matrix embedding_flat_forward(const TokenMatrix& tokens, const EmbeddingParams& p);

/// Table gradient from the gradient on the flattened rows.
Matrix embedding_flat_backward(const TokenMatrix& tokens, const Matrix& grad_flat,
                               Index vocab_rows);

// -------------------------------------------------------------------- dense

struct DenseParams {
  Matrix weights;  // in_dim x out_dim
  Matrix bias;     // 1 x out_dim
};

struct DenseCache {
  Matrix input;
  Matrix output;
  Activation activation = Activation::none;
};

struct DenseForward {
  Matrix out;
  DenseCache cache;
};

struct DenseGrads {
  Matrix weights;
  Matrix bias;
  Matrix input;
};

/// x is kept in the cache; pass an rvalue to avoid the copy.
DenseForward dense_forward(Matrix x, const DenseParams& p, Activation activation);
DenseGrads dense_backward(const DenseCache& cache, const DenseParams& p, const Matrix& grad_out);

// ------------------------------------------------------------------ flatten

struct FlattenCache {
  Index batch = 0;
  Index steps = 0;
  Index features = 0;
};

struct FlattenForward {
  Matrix out;  // batch x (steps * features), step vectors concatenated per row
  FlattenCache cache;
};

FlattenForward flatten_forward(const SequenceBatch& x);
SequenceBatch flatten_backward(const FlattenCache& cache, const Matrix& grad_out);

// ------------------------------------------------------------------ dropout

struct DropoutCache {
  Matrix mask;  // 0 or 1/(1-rate); empty when the layer acted as identity
};

struct DropoutForward {
  Matrix out;
  DropoutCache cache;
};

/// Inverted dropout. Inference mode and rate 0 return the input unchanged
/// and draw nothing from the generator.
DropoutForward dropout_forward(const Matrix& x, double rate, SeededRng& rng, bool training);
Matrix dropout_backward(const DropoutCache& cache, const Matrix& grad_out);

// --------------------------------------------------------------- batch norm

struct BatchNormParams {
  Matrix gamma;  // 1 x features
  Matrix beta;   // 1 x features
};

struct RunningStats {
  Matrix mean;      // 1 x features
  Matrix variance;  // 1 x features
};

struct BatchNormConfig {
  double momentum = 0.99;
  double epsilon = 1e-3;
};

struct BatchNormCache {
  Matrix normalized;  // x-hat
  Matrix inv_std;     // 1 x features
  bool training = false;
};

struct BatchNormForward {
  Matrix out;
  BatchNormCache cache;
  RunningStats running;  // updated statistics (training) or the inputs (inference)
};

struct BatchNormGrads {
  Matrix gamma;
  Matrix beta;
  Matrix input;
};

/// Training mode normalises by the batch mean and biased variance and returns
/// running <- momentum * running + (1 - momentum) * batch; inference mode
/// normalises by the running statistics. Nothing is mutated in place.
BatchNormForward batchnorm_forward(const Matrix& x, const BatchNormParams& p,
                                   const RunningStats& running, const BatchNormConfig& cfg,
                                   bool training);
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                  const Matrix& grad_out);

}  // namespace fraudtext
