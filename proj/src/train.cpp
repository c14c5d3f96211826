// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/train.hpp"

#include <cmath>
#include <numeric>

namespace fraudtext {

LossResult bce_loss(const Matrix& p, const std::vector<int>& labels) {
  if (p.cols() != 1 || p.rows() != static_cast<Index>(labels.size())) {
    throw ShapeError("bce_loss: predictions " + shape_string(p) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (p.rows() == 0) throw ShapeError("bce_loss: empty batch");
  const double n = static_cast<double>(p.rows());
  LossResult out{0.0, Matrix(p.rows(), 1)};
  for (Index i = 0; i < p.rows(); ++i) {
    const double raw = p(i, 0);
    const double q = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
    const bool inside = raw > kBceClamp && raw < 1.0 - kBceClamp;
    const int y = labels[static_cast<std::size_t>(i)];
    if (y == 1) {
      out.loss -= std::log(q);
      out.grad(i, 0) = inside ? -1.0 / (q * n) : 0.0;
    } else {
      out.loss -= std::log1p(-q);
      out.grad(i, 0) = inside ? 1.0 / ((1.0 - q) * n) : 0.0;
    }
  }
  out.loss /= n;
  return out;
}

AdamState AdamState::like(const std::vector<Matrix*>& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const Matrix* p : params) {
    s.m.push_back(Matrix::Zero(p->rows(), p->cols()));
    s.v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " +
                     std::to_string(state.m.size()) + " moment slots");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& p = *params[k];
    for (const Matrix* other : {&grads[k], static_cast<const Matrix*>(&state.m[k]),
                                static_cast<const Matrix*>(&state.v[k])}) {
      if (other->rows() != p.rows() || other->cols() != p.cols()) {
        throw ShapeError("adam_step: parameter " + std::to_string(k) + " is " + shape_string(p) +
                         " but its gradient or moment is " + shape_string(*other));
      }
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    const auto g = grads[k].array();
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    params[k]->array() -= c.learning_rate * (m / correct1) / ((v / correct2).sqrt() + c.epsilon);
  }
}

double global_norm(const std::vector<Matrix>& grads) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

std::vector<std::pair<Index, Index>> batch_ranges(Index n, Index batch_size, bool merge_singleton) {
  if (batch_size < 1) throw ParameterError("batch_size must be at least 1");
  std::vector<std::pair<Index, Index>> out;
  for (Index start = 0; start < n; start += batch_size) {
    out.emplace_back(start, std::min(n, start + batch_size));
  }
  if (merge_singleton && out.size() > 1 && out.back().second - out.back().first == 1) {
    out.pop_back();
    out.back().second = n;
  }
  return out;
}

Evaluation evaluate(const Model& model, const EncodedDataset& data, Index chunk) {
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  const Matrix p = model.predict(data.sequences, chunk);
  const std::vector<double> scores(p.data(), p.data() + p.size());
  return {bce_loss(p, data.labels).loss, auc(scores, data.labels)};
}

namespace {

enum Stream : std::uint64_t { kShuffleStream = 1, kDropoutStream = 2 };

void gather(const EncodedDataset& data, const std::vector<Index>& order, Index begin, Index end,
            TokenMatrix& tokens, std::vector<int>& labels) {
  tokens.resize(end - begin, data.sequences.cols());
  labels.resize(static_cast<std::size_t>(end - begin));
  for (Index i = begin; i < end; ++i) {
    const Index row = order[static_cast<std::size_t>(i)];
    tokens.row(i - begin) = data.sequences.row(row);
    labels[static_cast<std::size_t>(i - begin)] = data.labels[static_cast<std::size_t>(row)];
  }
}

}  // namespace

TrainResult train(Model& model, const EncodedDataset& train_set, const EncodedDataset& val_set,
                  const TrainConfig& config, SeededRng& rng,
                  const std::function<void(const EpochReport&)>& on_epoch) {
  if (train_set.size() == 0) throw DataError("train: empty training set");
  if (val_set.size() == 0) throw DataError("train: empty validation set");
  if (config.epochs < 1) throw ParameterError("train: epochs must be at least 1");
  train_set.validate(model.vocab_rows());
  val_set.validate(model.vocab_rows());

  SeededRng shuffle_rng = rng.derive(kShuffleStream);
  SeededRng dropout_rng = rng.derive(kDropoutStream);
  const std::vector<Matrix*> params = model.parameters();
  TrainResult result;
  result.adam = AdamState::like(params, config.adam);

  std::vector<Index> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto ranges = batch_ranges(train_set.size(), config.batch_size, model.has_batchnorm());
  TokenMatrix tokens;
  std::vector<int> labels;

  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<Index>(order));
    for (std::size_t b = 0; b < ranges.size(); ++b) {
      gather(train_set, order, ranges[b].first, ranges[b].second, tokens, labels);
      if (config.batch_observer) {
        config.batch_observer(epoch, std::vector<Index>(order.begin() + ranges[b].first,
                                                        order.begin() + ranges[b].second));
      }
      const ForwardPass pass = model.forward(tokens, true, &dropout_rng);
      const LossResult loss = bce_loss(pass.probabilities, labels);
      if (!std::isfinite(loss.loss)) {
        throw DivergenceError("loss is not finite at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(b + 1));
      }
      std::vector<Matrix> grads = model.backward(pass, loss.grad);
      if (grads.size() != params.size()) {
        throw ShapeError("train: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
      }
      if (config.clip_norm > 0.0) {
        const double norm = global_norm(grads);
        if (norm > config.clip_norm) {
          for (Matrix& g : grads) g *= config.clip_norm / norm;
        }
      }
      adam_step(params, grads, result.adam);
      model.commit(pass);
    }
    const Evaluation tr = evaluate(model, train_set, config.eval_chunk);
    const Evaluation va = evaluate(model, val_set, config.eval_chunk);
    const EpochRecord record{tr.loss, tr.auc, va.loss, va.auc};
    for (double v : {tr.loss, va.loss}) {
      if (!std::isfinite(v)) {
        throw DivergenceError("evaluation loss is not finite after epoch " + std::to_string(epoch));
      }
    }
    result.history.push_back(record);
    result.batches_per_epoch.push_back(static_cast<Index>(ranges.size()));
    if (on_epoch) on_epoch({epoch, static_cast<Index>(ranges.size()), record});
  }
  return result;
}

}  // namespace fraudtext
