// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/model.hpp"

#include <sstream>

#include "fraudtext/error.hpp"

namespace fraudtext {

namespace {

constexpr std::array<std::string_view, 5> kArchitectureNames{"simple_nn", "vanilla_rnn", "lstm",
                                                             "gru", "multi_lstm"};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::none: break;
  }
  return "linear";
}

// Flowing value between layers: a sequence batch or a plain batch matrix.
struct Flow {
  bool sequence = false;
  SequenceBatch seq;
  Matrix mat;
};

}  // namespace

std::string_view architecture_name(Architecture arch) {
  return kArchitectureNames[static_cast<std::size_t>(arch)];
}

Architecture parse_architecture(std::string_view name) {
  for (std::size_t i = 0; i < kArchitectureNames.size(); ++i) {
    if (kArchitectureNames[i] == name) return static_cast<Architecture>(i);
  }
  throw ConfigError("unknown model \"" + std::string(name) +
                    "\" (expected simple_nn, vanilla_rnn, lstm, gru or multi_lstm)");
}

void HyperParams::validate() const {
  const auto count = [](const char* field, Index v) {
    if (v < 1) throw ConfigError(std::string(field) + " must be at least 1, got " + std::to_string(v));
  };
  const auto rate = [](const char* field, double v) {
    if (!(v >= 0.0 && v < 1.0)) {
      throw ConfigError(std::string(field) + " must lie in [0, 1), got " + std::to_string(v));
    }
  };
  count("vocab_size", vocab_size);
  count("embedding_dim", embedding_dim);
  count("maxlen", maxlen);
  count("batch_size", batch_size);
  count("epochs", epochs);
  count("hidden_size", hidden_size);
  count("dense_size", dense_size);
  rate("learning_rate", learning_rate);
  rate("dropout_rate", dropout_rate);
  rate("test_fraction", test_fraction);
  if (test_fraction == 0.0) throw ConfigError("test_fraction must be greater than 0");
}

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::embedding: return "embedding";
    case LayerKind::flatten: return "flatten";
    case LayerKind::bidirectional: return "bidirectional";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::batchnorm: return "batchnorm";
  }
  return "?";
}

std::string LayerSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case LayerKind::embedding: os << "Embedding(" << units << ")"; break;
    case LayerKind::flatten: os << "Flatten"; break;
    case LayerKind::bidirectional:
      os << "Bi-" << cell_name(cell) << "(" << units << ", "
         << (mode == SequenceMode::final_state ? "final-state" : "full-sequence") << ")";
      break;
    case LayerKind::dense: os << "Dense(" << units << ", " << activation_name(activation) << ")"; break;
    case LayerKind::dropout: os << "Dropout(" << rate << ")"; break;
    case LayerKind::batchnorm: os << "BatchNorm"; break;
  }
  return os.str();
}

ModelSpec ModelSpec::make(Architecture arch, const HyperParams& hp) {
  hp.validate();
  const LayerSpec embedding{LayerKind::embedding, hp.embedding_dim};
  const auto bi = [&](CellKind cell, SequenceMode mode) {
    return LayerSpec{LayerKind::bidirectional, hp.hidden_size, cell, mode};
  };
  const LayerSpec hidden{LayerKind::dense, hp.dense_size, CellKind::lstm,
                         SequenceMode::final_state, Activation::relu};
  const LayerSpec output{LayerKind::dense, 1, CellKind::lstm, SequenceMode::final_state,
                         Activation::sigmoid};
  LayerSpec dropout{LayerKind::dropout};
  dropout.rate = hp.dropout_rate;
  const LayerSpec batchnorm{LayerKind::batchnorm, hp.dense_size};

  ModelSpec spec;
  spec.arch = arch;
  switch (arch) {
    case Architecture::simple_nn:
      spec.layers = {embedding, LayerSpec{LayerKind::flatten}, hidden, output};
      break;
    case Architecture::vanilla_rnn:
      spec.layers = {embedding, bi(CellKind::rnn, SequenceMode::final_state), hidden, output};
      break;
    case Architecture::gru:
      spec.layers = {embedding, bi(CellKind::gru, SequenceMode::final_state), hidden, output};
      break;
    case Architecture::lstm:
      spec.layers = {embedding, bi(CellKind::lstm, SequenceMode::final_state), dropout, hidden,
                     batchnorm, dropout, output};
      break;
    case Architecture::multi_lstm:
      spec.layers = {embedding, bi(CellKind::lstm, SequenceMode::full_sequence),
                     bi(CellKind::lstm, SequenceMode::final_state), dropout, hidden, batchnorm,
                     dropout, output};
      break;
  }
  return spec;
}

std::string ModelSpec::describe() const {
  std::string out(architecture_name(arch));
  out += ":";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out += i == 0 ? " " : " -> ";
    out += layers[i].describe();
  }
  return out;
}

// -------------------------------------------------------------------- model

Model::Model(ModelSpec spec, std::vector<Layer> layers, Index vocab_rows, Index maxlen)
    : spec_(std::move(spec)), layers_(std::move(layers)), vocab_rows_(vocab_rows), maxlen_(maxlen) {
  if (layers_.empty() || !std::holds_alternative<EmbeddingLayer>(layers_.front())) {
    throw ShapeError("model: the first layer must be an embedding");
  }
  if (layers_.size() != spec_.layers.size()) {
    throw ShapeError("model: " + std::to_string(layers_.size()) + " layers but the spec lists " +
                     std::to_string(spec_.layers.size()));
  }
  // Walk the shapes once so a bad chain fails at construction.
  bool sequence = true;
  Index width = std::get<EmbeddingLayer>(layers_.front()).params.table.cols();
  if (std::get<EmbeddingLayer>(layers_.front()).params.table.rows() != vocab_rows_) {
    throw ShapeError("model: embedding table has " +
                     std::to_string(std::get<EmbeddingLayer>(layers_.front()).params.table.rows()) +
                     " rows, expected " + std::to_string(vocab_rows_));
  }
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    const std::string where = "model layer " + std::to_string(i) + ": ";
    std::visit(Overloaded{
                   [&](const EmbeddingLayer&) { throw ShapeError(where + "embedding must come first"); },
                   [&](const FlattenLayer&) {
                     if (!sequence) throw ShapeError(where + "flatten needs a sequence input");
                     sequence = false;
                     width *= maxlen_;
                   },
                   [&](const BidirectionalLayer& l) {
                     if (!sequence) throw ShapeError(where + "recurrent layer needs a sequence input");
                     l.params.validate();
                     if (l.params.input_dim() != width) {
                       throw ShapeError(where + "expects " + std::to_string(l.params.input_dim()) +
                                        " input features, got " + std::to_string(width));
                     }
                     sequence = l.mode == SequenceMode::full_sequence;
                     width = 2 * l.params.hidden();
                   },
                   [&](const DenseLayer& l) {
                     if (sequence) throw ShapeError(where + "dense needs a flat input");
                     if (l.params.weights.rows() != width ||
                         l.params.bias.cols() != l.params.weights.cols() || l.params.bias.rows() != 1) {
                       throw ShapeError(where + "dense weights " + shape_string(l.params.weights) +
                                        " / bias " + shape_string(l.params.bias) +
                                        " do not fit input width " + std::to_string(width));
                     }
                     width = l.params.weights.cols();
                   },
                   [&](const DropoutLayer& l) {
                     if (sequence) throw ShapeError(where + "dropout needs a flat input");
                     if (!(l.rate >= 0.0 && l.rate < 1.0)) {
                       throw ParameterError(where + "dropout rate must lie in [0, 1)");
                     }
                   },
                   [&](const BatchNormLayer& l) {
                     if (sequence) throw ShapeError(where + "batch norm needs a flat input");
                     for (const Matrix* m : {&l.params.gamma, &l.params.beta, &l.running.mean,
                                             &l.running.variance}) {
                       if (m->rows() != 1 || m->cols() != width) {
                         throw ShapeError(where + "batch-norm vector " + shape_string(*m) +
                                          " does not fit width " + std::to_string(width));
                       }
                     }
                   },
               },
               layers_[i]);
  }
  if (sequence || width != 1) {
    throw ShapeError("model: the last layer must produce one probability per row");
  }
  const auto* last = std::get_if<DenseLayer>(&layers_.back());
  if (last == nullptr || last->activation != Activation::sigmoid) {
    throw ShapeError("model: the last layer must be a sigmoid dense unit");
  }
}

bool Model::has_batchnorm() const {
  for (const auto& l : layers_) {
    if (std::holds_alternative<BatchNormLayer>(l)) return true;
  }
  return false;
}

std::vector<NamedTensor> Model::tensors() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = std::to_string(i) + "." +
                               std::string(layer_kind_name(spec_.layers[i].kind)) + ".";
    std::visit(Overloaded{
                   [&](EmbeddingLayer& l) { out.push_back({prefix + "table", &l.params.table}); },
                   [&](FlattenLayer&) {},
                   [&](BidirectionalLayer& l) {
                     for (auto [dir, cell] : {std::pair{"forward.", &l.params.forward},
                                              std::pair{"backward.", &l.params.backward}}) {
                       out.push_back({prefix + dir + "input_weights", &cell->input_weights});
                       out.push_back({prefix + dir + "recurrent_weights", &cell->recurrent_weights});
                       out.push_back({prefix + dir + "bias", &cell->bias});
                     }
                   },
                   [&](DenseLayer& l) {
                     out.push_back({prefix + "weights", &l.params.weights});
                     out.push_back({prefix + "bias", &l.params.bias});
                   },
                   [&](DropoutLayer&) {},
                   [&](BatchNormLayer& l) {
                     out.push_back({prefix + "gamma", &l.params.gamma});
                     out.push_back({prefix + "beta", &l.params.beta});
                     out.push_back({prefix + "running_mean", &l.running.mean, false});
                     out.push_back({prefix + "running_variance", &l.running.variance, false});
                   },
               },
               layers_[i]);
  }
  return out;
}

std::vector<NamedConstTensor> Model::tensors() const {
  std::vector<NamedConstTensor> out;
  for (const auto& t : const_cast<Model*>(this)->tensors()) {
    out.push_back({t.name, t.value, t.trainable});
  }
  return out;
}

std::vector<Matrix*> Model::parameters() {
  std::vector<Matrix*> out;
  for (const auto& t : tensors()) {
    if (t.trainable) out.push_back(t.value);
  }
  return out;
}

Index Model::parameter_count() const {
  Index n = 0;
  for (const auto& t : tensors()) {
    if (t.trainable) n += t.value->size();
  }
  return n;
}

ForwardPass Model::forward(const TokenMatrix& tokens, bool training, SeededRng* rng) const {
  if (tokens.rows() < 1) throw DataError("model: empty batch");
  if (tokens.cols() != maxlen_) {
    throw ShapeError("model: token matrix " + shape_string(tokens.rows(), tokens.cols()) +
                     " does not have maxlen = " + std::to_string(maxlen_) + " columns");
  }
  if (training && rng == nullptr) throw ParameterError("model: training mode needs a generator");
  ForwardPass pass;
  pass.training = training;
  pass.caches.reserve(layers_.size());
  pass.running.resize(layers_.size());
  Flow flow;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::visit(
        Overloaded{
            [&](const EmbeddingLayer& l) {
              const bool fuse = i + 1 < layers_.size() &&
                                std::holds_alternative<BidirectionalLayer>(layers_[i + 1]);
              if (fuse) {
                check_token_range(tokens, l.params.table.rows());
                pass.caches.emplace_back(FusedEmbeddingCache{});
                return;
              }
              if (i + 1 < layers_.size() && std::holds_alternative<FlattenLayer>(layers_[i + 1])) {
                flow.sequence = false;
                flow.mat = embedding_flat_forward(tokens, l.params);
                pass.caches.emplace_back(FlatEmbeddingCache{tokens});
                return;
              }
              EmbeddingForward f = embedding_forward(tokens, l.params);
              flow.sequence = true;
              flow.seq = std::move(f.out);
              pass.caches.emplace_back(std::move(f.cache));
            },
            [&](const FlattenLayer&) {
              if (std::holds_alternative<FlatEmbeddingCache>(pass.caches.back())) {
                pass.caches.emplace_back(FlattenCache{});
                return;
              }
              FlattenForward f = flatten_forward(flow.seq);
              flow.sequence = false;
              flow.mat = std::move(f.out);
              pass.caches.emplace_back(f.cache);
            },
            [&](const BidirectionalLayer& l) {
              BidirectionalForward f =
                  std::holds_alternative<FusedEmbeddingCache>(pass.caches.back())
                      ? run_bidirectional_tokens(
                            tokens, std::get<EmbeddingLayer>(layers_[i - 1]).params.table,
                            l.params, l.mode)
                      : run_bidirectional(flow.seq, l.params, l.mode);
              if (l.mode == SequenceMode::full_sequence) {
                flow.sequence = true;
                flow.seq = std::move(f.sequence);
              } else {
                flow.sequence = false;
                flow.mat = std::move(f.final_state);
              }
              pass.caches.emplace_back(std::move(f.cache));
            },
            [&](const DenseLayer& l) {
              DenseForward f = dense_forward(std::move(flow.mat), l.params, l.activation);
              flow.mat = std::move(f.out);
              pass.caches.emplace_back(std::move(f.cache));
            },
            [&](const DropoutLayer& l) {
              DropoutForward f = training ? dropout_forward(flow.mat, l.rate, *rng, true)
                                          : DropoutForward{flow.mat, {}};
              flow.mat = std::move(f.out);
              pass.caches.emplace_back(std::move(f.cache));
            },
            [&](const BatchNormLayer& l) {
              BatchNormForward f = batchnorm_forward(flow.mat, l.params, l.running, l.config, training);
              flow.mat = std::move(f.out);
              if (training) pass.running[i] = std::move(f.running);
              pass.caches.emplace_back(std::move(f.cache));
            },
        },
        layers_[i]);
  }
  pass.probabilities = std::move(flow.mat);
  return pass;
}

std::vector<Matrix> Model::backward(const ForwardPass& pass, const Matrix& grad_probabilities) const {
  if (pass.caches.size() != layers_.size()) throw ShapeError("model: forward pass does not match model");
  if (grad_probabilities.rows() != pass.probabilities.rows() || grad_probabilities.cols() != 1) {
    throw ShapeError("model: output gradient " + shape_string(grad_probabilities) + " vs output " +
                     shape_string(pass.probabilities));
  }
  std::vector<std::vector<Matrix>> per_layer(layers_.size());
  Flow grad;
  grad.mat = grad_probabilities;
  BidirectionalGrads fused;  // table rows handed back to a fused embedding
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const LayerCache& cache = pass.caches[k];
    auto& out = per_layer[k];
    std::visit(
        Overloaded{
            [&](const EmbeddingLayer& l) {
              if (std::holds_alternative<FusedEmbeddingCache>(cache)) {
                Matrix table = Matrix::Zero(l.params.table.rows(), l.params.table.cols());
                for (std::size_t r = 0; r < fused.table_rows.size(); ++r) {
                  table.row(fused.table_rows[r]) += fused.table_row_grads.row(static_cast<Index>(r));
                }
                out.push_back(std::move(table));
              } else if (const auto* flat = std::get_if<FlatEmbeddingCache>(&cache)) {
                out.push_back(embedding_flat_backward(flat->tokens, grad.mat, l.params.table.rows()));
              } else {
                out.push_back(embedding_backward(std::get<EmbeddingCache>(cache), grad.seq,
                                                 l.params.table.rows()));
              }
            },
            [&](const FlattenLayer&) {
              if (std::holds_alternative<FlatEmbeddingCache>(pass.caches[k - 1])) return;
              grad.seq = flatten_backward(std::get<FlattenCache>(cache), grad.mat);
            },
            [&](const BidirectionalLayer& l) {
              const auto& c = std::get<BidirectionalCache>(cache);
              BidirectionalGrads g = backprop_bidirectional(
                  c, l.params, l.mode == SequenceMode::full_sequence ? grad.seq.data : grad.mat);
              for (CellGrads* cg : {&g.forward, &g.backward}) {
                out.push_back(std::move(cg->input_weights));
                out.push_back(std::move(cg->recurrent_weights));
                out.push_back(std::move(cg->bias));
              }
              if (c.from_tokens) {
                fused = std::move(g);
              } else {
                grad.seq = std::move(g.input);
              }
            },
            [&](const DenseLayer& l) {
              DenseGrads g = dense_backward(std::get<DenseCache>(cache), l.params, grad.mat);
              out.push_back(std::move(g.weights));
              out.push_back(std::move(g.bias));
              grad.mat = std::move(g.input);
            },
            [&](const DropoutLayer&) {
              const auto& c = std::get<DropoutCache>(cache);
              if (c.mask.size() > 0) grad.mat = dropout_backward(c, grad.mat);
            },
            [&](const BatchNormLayer& l) {
              BatchNormGrads g = batchnorm_backward(std::get<BatchNormCache>(cache), l.params, grad.mat);
              out.push_back(std::move(g.gamma));
              out.push_back(std::move(g.beta));
              grad.mat = std::move(g.input);
            },
        },
        layers_[k]);
  }
  std::vector<Matrix> grads;
  for (auto& layer : per_layer) {
    for (auto& g : layer) grads.push_back(std::move(g));
  }
  return grads;
}

void Model::commit(const ForwardPass& pass) {
  if (!pass.training) return;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (auto* bn = std::get_if<BatchNormLayer>(&layers_[i])) bn->running = pass.running[i];
  }
}

Matrix Model::predict(const TokenMatrix& tokens, Index chunk) const {
  if (chunk < 1) throw ParameterError("predict: chunk must be at least 1");
  Matrix out(tokens.rows(), 1);
  for (Index start = 0; start < tokens.rows(); start += chunk) {
    const Index n = std::min(chunk, tokens.rows() - start);
    const TokenMatrix part = tokens.middleRows(start, n);
    out.middleRows(start, n) = forward(part, false, nullptr).probabilities;
  }
  return out;
}

// -------------------------------------------------------------------- build

Model build_model(Architecture arch, const HyperParams& hp, SeededRng& rng) {
  return build_model(ModelSpec::make(arch, hp), hp, rng);
}

Model build_model(const ModelSpec& spec, const HyperParams& hp, SeededRng& rng) {
  hp.validate();
  const Index vocab_rows = hp.vocab_size + 2;
  std::vector<Layer> layers;
  Index width = 0;
  for (const LayerSpec& ls : spec.layers) {
    switch (ls.kind) {
      case LayerKind::embedding: {
        Matrix table(vocab_rows, ls.units);
        for (Index i = 0; i < table.size(); ++i) table.data()[i] = rng.uniform(-0.05, 0.05);
        layers.emplace_back(EmbeddingLayer{{std::move(table)}});
        width = ls.units;
        break;
      }
      case LayerKind::flatten:
        layers.emplace_back(FlattenLayer{});
        width *= hp.maxlen;
        break;
      case LayerKind::bidirectional: {
        BidirectionalParams p{CellParams::glorot(ls.cell, width, ls.units, rng),
                              CellParams::glorot(ls.cell, width, ls.units, rng)};
        layers.emplace_back(BidirectionalLayer{std::move(p), ls.mode});
        width = 2 * ls.units;
        break;
      }
      case LayerKind::dense:
        layers.emplace_back(DenseLayer{{glorot_uniform<double>(rng, width, ls.units),
                                        Matrix::Zero(1, ls.units)},
                                       ls.activation});
        width = ls.units;
        break;
      case LayerKind::dropout:
        layers.emplace_back(DropoutLayer{ls.rate});
        break;
      case LayerKind::batchnorm:
        layers.emplace_back(BatchNormLayer{{Matrix::Ones(1, width), Matrix::Zero(1, width)},
                                           {Matrix::Zero(1, width), Matrix::Ones(1, width)},
                                           {}});
        break;
    }
  }
  return Model(spec, std::move(layers), vocab_rows, hp.maxlen);
}

}  // namespace fraudtext
