// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fraudtext/layers.hpp"
#include "fraudtext/recurrent.hpp"
#include "fraudtext/rng.hpp"

namespace fraudtext {

enum class Architecture { simple_nn, vanilla_rnn, lstm, gru, multi_lstm };

/// Report order.
inline constexpr std::array<Architecture, 5> kArchitectures{
    Architecture::simple_nn, Architecture::vanilla_rnn, Architecture::lstm, Architecture::gru,
    Architecture::multi_lstm};

std::string_view architecture_name(Architecture arch);
/// Throws ConfigError for unknown names.
Architecture parse_architecture(std::string_view name);

struct HyperParams {
  Index vocab_size = 20000;
  Index embedding_dim = 150;
  Index maxlen = 200;
  Index batch_size = 256;
  Index epochs = 10;
  double learning_rate = 1e-3;
  Index hidden_size = 64;  // per direction
  Index dense_size = 64;
  double dropout_rate = 0.2;
  double test_fraction = 0.2;
  std::uint64_t seed = 42;

  /// Throws ConfigError naming the first bad field.
  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

// ------------------------------------------------------------------- layers

enum class LayerKind { embedding, flatten, bidirectional, dense, dropout, batchnorm };

std::string_view layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Index units = 0;                          // dense units, recurrent hidden per direction
  CellKind cell = CellKind::lstm;           // bidirectional only
  SequenceMode mode = SequenceMode::final_state;
  Activation activation = Activation::none; // dense only
  double rate = 0.0;                        // dropout only

  std::string describe() const;
  bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
  Architecture arch = Architecture::simple_nn;
  std::vector<LayerSpec> layers;

  static ModelSpec make(Architecture arch, const HyperParams& hp);
  std::string describe() const;
  bool operator==(const ModelSpec&) const = default;
};

struct EmbeddingLayer {
  EmbeddingParams params;
};
struct FlattenLayer {};
struct BidirectionalLayer {
  BidirectionalParams params;
  SequenceMode mode = SequenceMode::final_state;
};
struct DenseLayer {
  DenseParams params;
  Activation activation = Activation::none;
};
struct DropoutLayer {
  double rate = 0.0;
};
struct BatchNormLayer {
  BatchNormParams params;
  RunningStats running;
  BatchNormConfig config;
};

using Layer = std::variant<EmbeddingLayer, FlattenLayer, BidirectionalLayer, DenseLayer,
                           DropoutLayer, BatchNormLayer>;

/// A named matrix owned by the model. Buffers (batch-norm running
/// statistics) are saved with the model but never trained.
struct NamedTensor {
  std::string name;
  Matrix* value = nullptr;
  bool trainable = true;
};

struct NamedConstTensor {
  std::string name;
  const Matrix* value = nullptr;
  bool trainable = true;
};

// Cache of one layer's forward pass.
struct FusedEmbeddingCache {};  // embedding consumed by the next bidirectional layer
struct FlatEmbeddingCache {     // embedding gathered straight into flattened rows
  TokenMatrix tokens;
};
using LayerCache = std::variant<EmbeddingCache, FusedEmbeddingCache, FlatEmbeddingCache, FlattenCache,
                                BidirectionalCache, DenseCache, DropoutCache, BatchNormCache>;

struct ForwardPass {
  Matrix probabilities;  // batch x 1
  std::vector<LayerCache> caches;
  std::vector<RunningStats> running;  // per layer; filled for batch norm in training mode
  bool training = false;
};

/**
 * A sequential classifier over padded token matrices ending in one sigmoid
 * unit. Parameters are addressed in a fixed order shared by tensors(),
 * parameters() and the gradient list returned by backward().
 */
class Model {
 public:
  Model() = default;
  Model(ModelSpec spec, std::vector<Layer> layers, Index vocab_rows, Index maxlen);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }
  Index vocab_rows() const { return vocab_rows_; }
  Index maxlen() const { return maxlen_; }
  bool has_batchnorm() const;

  std::vector<NamedTensor> tensors();
  std::vector<NamedConstTensor> tensors() const;
  std::vector<Matrix*> parameters();
  Index parameter_count() const;

  /// `rng` feeds dropout and may be null in inference mode.
  ForwardPass forward(const TokenMatrix& tokens, bool training, SeededRng* rng) const;

  /// Gradients in parameters() order, given dLoss/dprobabilities.
  std::vector<Matrix> backward(const ForwardPass& pass, const Matrix& grad_probabilities) const;

  /// Store the batch-norm running statistics produced by a training pass.
  void commit(const ForwardPass& pass);

  /// Inference-mode probabilities, evaluated in chunks of `chunk` rows.
  Matrix predict(const TokenMatrix& tokens, Index chunk = 512) const;

 private:
  ModelSpec spec_;
  std::vector<Layer> layers_;
  Index vocab_rows_ = 0;
  Index maxlen_ = 0;
};

/// Instantiates the architecture with vocab_size + 2 embedding rows.
Model build_model(Architecture arch, const HyperParams& hp, SeededRng& rng);
Model build_model(const ModelSpec& spec, const HyperParams& hp, SeededRng& rng);

}  // namespace fraudtext
