// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <utility>

#include "doctest.h"
#include "fraudtext/model.hpp"
#include "fraudtext/train.hpp"
#include "support/gradcheck.hpp"

using namespace fraudtext;
using namespace fraudtext::testing;

namespace {

HyperParams small_params() {
  HyperParams hp;
  hp.vocab_size = 12;
  hp.embedding_dim = 3;
  hp.maxlen = 4;
  hp.hidden_size = 2;
  hp.dense_size = 3;
  return hp;
}

TokenMatrix random_tokens(SeededRng& rng, Index rows, Index cols, Index table_rows) {
  TokenMatrix t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) {
    t.data()[i] = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(table_rows)));
  }
  return t;
}

// Trainable parameter count written out from the layer formulas.
Index expected_parameters(Architecture arch, const HyperParams& hp) {
  const Index e = hp.embedding_dim, h = hp.hidden_size, d = hp.dense_size;
  const Index table = (hp.vocab_size + 2) * e;
  const auto bi = [&](Index gates, Index in) { return 2 * gates * h * (in + h + 1); };
  const Index head = (2 * h) * d + d + d + 1;
  switch (arch) {
    case Architecture::simple_nn: return table + hp.maxlen * e * d + d + d + 1;
    case Architecture::vanilla_rnn: return table + bi(1, e) + head;
    case Architecture::gru: return table + bi(3, e) + head;
    case Architecture::lstm: return table + bi(4, e) + head + 2 * d;
    case Architecture::multi_lstm: return table + bi(4, e) + bi(4, 2 * h) + head + 2 * d;
  }
  return 0;
}

}  // namespace

TEST_CASE("architecture names") {
  for (Architecture a : kArchitectures) CHECK(parse_architecture(architecture_name(a)) == a);
  CHECK(architecture_name(kArchitectures[0]) == "simple_nn");
  CHECK(architecture_name(kArchitectures[4]) == "multi_lstm");
  CHECK_THROWS_AS(parse_architecture("transformer"), ConfigError);
  CHECK_THROWS_AS(parse_architecture(""), ConfigError);
}

TEST_CASE("hyperparameter defaults and validation") {
  const HyperParams hp;
  CHECK(hp.vocab_size == 20000);
  CHECK(hp.embedding_dim == 150);
  CHECK(hp.maxlen == 200);
  CHECK(hp.batch_size == 256);
  CHECK(hp.epochs == 10);
  CHECK_NOTHROW(hp.validate());
  HyperParams bad = hp;
  bad.hidden_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = hp;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = hp;
  bad.test_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("model specs list the layer chains") {
  const HyperParams hp = small_params();
  CHECK(ModelSpec::make(Architecture::simple_nn, hp).describe() ==
        "simple_nn: Embedding(3) -> Flatten -> Dense(3, relu) -> Dense(1, sigmoid)");
  CHECK(ModelSpec::make(Architecture::vanilla_rnn, hp).describe() ==
        "vanilla_rnn: Embedding(3) -> Bi-rnn(2, final-state) -> Dense(3, relu) -> Dense(1, sigmoid)");
  CHECK(ModelSpec::make(Architecture::gru, hp).describe() ==
        "gru: Embedding(3) -> Bi-gru(2, final-state) -> Dense(3, relu) -> Dense(1, sigmoid)");
  CHECK(ModelSpec::make(Architecture::lstm, hp).describe() ==
        "lstm: Embedding(3) -> Bi-lstm(2, final-state) -> Dropout(0.2) -> Dense(3, relu) -> "
        "BatchNorm -> Dropout(0.2) -> Dense(1, sigmoid)");
  CHECK(ModelSpec::make(Architecture::multi_lstm, hp).describe() ==
        "multi_lstm: Embedding(3) -> Bi-lstm(2, full-sequence) -> Bi-lstm(2, final-state) -> "
        "Dropout(0.2) -> Dense(3, relu) -> BatchNorm -> Dropout(0.2) -> Dense(1, sigmoid)");
}

TEST_CASE("parameter counts") {
  const HyperParams hp = small_params();
  for (Architecture a : kArchitectures) {
    CAPTURE(architecture_name(a));
    SeededRng rng(1);
    const Model m = build_model(a, hp, rng);
    CHECK(m.parameter_count() == expected_parameters(a, hp));
  }

  // Default embedding: (20000 words + pad + OOV rows) x 150.
  SeededRng rng(2);
  const Model simple = build_model(Architecture::simple_nn, HyperParams{}, rng);
  const auto tensors = simple.tensors();
  CHECK(tensors.front().value->rows() * tensors.front().value->cols() == 3'000'300);
  CHECK(simple.parameter_count() == 3'000'300 + 30'000 * 64 + 64 + 64 + 1);
}

TEST_CASE("models: outputs are probabilities and builds are seed-determined") {
  const HyperParams hp = small_params();
  for (Architecture a : kArchitectures) {
    CAPTURE(architecture_name(a));
    SeededRng r1(5), r2(5), r3(6);
    Model m1 = build_model(a, hp, r1);
    const Model m2 = build_model(a, hp, r2);
    const Model m3 = build_model(a, hp, r3);
    const auto t1 = std::as_const(m1).tensors();
    const auto t2 = m2.tensors();
    const auto t3 = m3.tensors();
    bool any_diff = false;
    for (std::size_t i = 0; i < t1.size(); ++i) {
      CHECK(t1[i].name == t2[i].name);
      CHECK(*t1[i].value == *t2[i].value);
      any_diff = any_diff || *t1[i].value != *t3[i].value;
    }
    CHECK(any_diff);

    SeededRng data(7);
    const TokenMatrix tokens = random_tokens(data, 9, hp.maxlen, hp.vocab_size + 2);
    const Matrix p = m1.predict(tokens);
    REQUIRE(p.rows() == 9);
    CHECK(p.cols() == 1);
    CHECK((p.array() > 0.0).all());
    CHECK((p.array() < 1.0).all());
    CHECK(m1.predict(tokens, 2) == p);
    SeededRng drop(8);
    const ForwardPass pass = m1.forward(tokens, true, &drop);
    CHECK((pass.probabilities.array() > 0.0).all());
    CHECK((pass.probabilities.array() < 1.0).all());
  }
}

TEST_CASE("models: input validation") {
  const HyperParams hp = small_params();
  SeededRng rng(9);
  const Model m = build_model(Architecture::gru, hp, rng);
  CHECK_THROWS_AS(m.predict(TokenMatrix::Zero(2, hp.maxlen + 1)), ShapeError);
  TokenMatrix bad = TokenMatrix::Zero(2, hp.maxlen);
  bad(1, 1) = static_cast<std::int32_t>(hp.vocab_size + 2);
  CHECK_THROWS_AS(m.predict(bad), IndexError);
  CHECK_THROWS_AS(m.forward(TokenMatrix::Zero(2, hp.maxlen), true, nullptr), ParameterError);
}

TEST_CASE("models: end-to-end gradients match finite differences") {
  const HyperParams hp = small_params();
  for (Architecture a : kArchitectures) {
    CAPTURE(architecture_name(a));
    SeededRng rng(31);
    Model model = build_model(a, hp, rng);
    // Perturb the batch-norm affine terms and biases away from their
    // symmetric starting values.
    for (Matrix* p : model.parameters()) *p += random_matrix(rng, p->rows(), p->cols(), 0.1);
    const TokenMatrix tokens = random_tokens(rng, 6, hp.maxlen, hp.vocab_size + 2);
    const std::vector<int> labels{1, 0, 0, 1, 1, 0};
    const SeededRng mask_rng(32);

    // Training mode with a replayed dropout stream: the mask is fixed.
    const auto loss = [&] {
      SeededRng r = mask_rng;
      return bce_loss(model.forward(tokens, true, &r).probabilities, labels).loss;
    };
    SeededRng r = mask_rng;
    const ForwardPass pass = model.forward(tokens, true, &r);
    const std::vector<Matrix> grads =
        model.backward(pass, bce_loss(pass.probabilities, labels).grad);
    const auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Matrix numeric = numeric_gradient(*params[i], loss);
      CHECK(max_relative_error(grads[i], numeric) < 1e-4);
    }
  }
}
