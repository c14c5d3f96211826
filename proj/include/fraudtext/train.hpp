// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "fraudtext/metrics.hpp"
#include "fraudtext/model.hpp"
#include "fraudtext/text.hpp"

namespace fraudtext {

inline constexpr double kBceClamp = 1e-7;

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // dLoss/dp, same shape as p
};

/**
 * Mean binary cross-entropy on p clamped to [1e-7, 1 - 1e-7]. Entries
 * outside the clamp get zero gradient. p is N x 1, labels has N entries.
 */
LossResult bce_loss(const Matrix& p, const std::vector<int>& labels);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  /// Zero moments shaped like `params`.
  static AdamState like(const std::vector<Matrix*>& params, AdamConfig config = {});
};

/// One bias-corrected Adam update. Throws ShapeError on any shape mismatch.
void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state);

/// Global L2 norm over all gradients.
double global_norm(const std::vector<Matrix>& grads);

struct TrainConfig {
  Index batch_size = 256;
  Index epochs = 10;
  AdamConfig adam;
  double clip_norm = 0.0;  // 0 disables clipping
  Index eval_chunk = 512;
  /// Called with (epoch, row indices) before each batch is trained.
  std::function<void(Index, const std::vector<Index>&)> batch_observer;
};

struct EpochReport {
  Index epoch = 0;  // 1-based
  Index batches = 0;
  EpochRecord record;
};

struct TrainResult {
  TrainHistory history;
  AdamState adam;
  std::vector<Index> batches_per_epoch;
};

/// Batch boundaries for n rows. A trailing batch of one row is folded into
/// the previous batch when `merge_singleton` is set (batch norm cannot
/// normalise a single row).
std::vector<std::pair<Index, Index>> batch_ranges(Index n, Index batch_size, bool merge_singleton);

struct Evaluation {
  double loss = 0.0;
  double auc = 0.0;
};

/// Inference-mode loss and AUC; never mutates the model.
Evaluation evaluate(const Model& model, const EncodedDataset& data, Index chunk = 512);

/**
 * Mini-batch training. Each epoch shuffles the rows, runs forward, backward
 * and an Adam step per batch (dropout and batch norm in training mode), then
 * records train and validation loss and AUC in inference mode.
 * Throws DataError for empty datasets and DivergenceError when a batch loss
 * is not finite.
 */
TrainResult train(Model& model, const EncodedDataset& train_set, const EncodedDataset& val_set,
                  const TrainConfig& config, SeededRng& rng,
                  const std::function<void(const EpochReport&)>& on_epoch = {});

}  // namespace fraudtext
