// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "fraudtext/metrics.hpp"
#include "support/auc_oracle.hpp"

using namespace fraudtext;
using fraudtext::testing::pairwise_auc;
using fraudtext::testing::random_auc_instance;

TEST_CASE("auc examples") {
  CHECK(auc({0.9, 0.1}, {1, 0}) == 1.0);
  CHECK(auc({0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}) == 0.5);
  CHECK(auc({0.8, 0.6, 0.4, 0.2}, {1, 0, 1, 0}) == 0.75);
  CHECK(auc({0.1, 0.9}, {1, 0}) == 0.0);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), MetricError);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {0, 0}), MetricError);
  CHECK_THROWS_AS(auc({0.1}, {1, 0}), ShapeError);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 2}), MetricError);
}

TEST_CASE("roc examples") {
  const auto pts = roc_points({0.9, 0.1}, {1, 0});
  CHECK(pts == std::vector<RocPoint>{{0, 0}, {0, 1}, {1, 1}});
  const auto tied = roc_points({0.5, 0.5, 0.5}, {1, 0, 0});
  CHECK(tied == std::vector<RocPoint>{{0, 0}, {1, 1}});
  CHECK(trapezoid_area(tied) == 0.5);
  CHECK_THROWS_AS(roc_points({0.1}, {0}), MetricError);
}

TEST_CASE("auc agrees with the pairwise oracle and the ROC area") {
  SeededRng rng(314);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_auc_instance(rng, 600);
    const double a = auc(inst.scores, inst.labels);
    CHECK(std::abs(a - pairwise_auc(inst.scores, inst.labels)) <= 1e-12);
    const auto pts = roc_points(inst.scores, inst.labels);
    CHECK(std::abs(trapezoid_area(pts) - a) <= 1e-12);
    CHECK(pts.front() == RocPoint{0, 0});
    CHECK(pts.back() == RocPoint{1, 1});
    for (std::size_t k = 1; k < pts.size(); ++k) {
      CHECK(pts[k].fpr >= pts[k - 1].fpr);
      CHECK(pts[k].tpr >= pts[k - 1].tpr);
    }

    std::vector<double> negated, squashed;
    for (double s : inst.scores) {
      negated.push_back(-s);
      squashed.push_back(std::exp(3.0 * s) + 7.0);
    }
    CHECK(std::abs(a + auc(negated, inst.labels) - 1.0) <= 1e-12);
    CHECK(auc(squashed, inst.labels) == a);
  }
}

TEST_CASE("best_epoch") {
  const auto h = [](std::vector<double> val) {
    TrainHistory out;
    for (double v : val) out.push_back({0.1, 0.9, 0.7, v});
    return out;
  };
  CHECK(best_epoch(h({0.5, 0.7, 0.6})).first == 2);
  CHECK(best_epoch(h({0.4})).first == 1);
  CHECK(best_epoch(h({0.6, 0.6, 0.6})).first == 1);
  CHECK(best_epoch(h({0.1, 0.8, 0.3, 0.8})).first == 2);
  CHECK_THROWS_AS(best_epoch({}), DataError);
}

TEST_CASE("result rows") {
  // Best epoch carries the published Multi-layer LSTM statistics.
  TrainHistory history{{0.2, 0.9, 0.7, 0.52}, {0.0130, 0.9999, 0.6405, 0.5990},
                       {0.0100, 1.0, 0.7000, 0.5500}};
  const ResultRow row = make_result_row("multi_lstm", history);
  CHECK(row.model_name == "multi_lstm");
  CHECK(row.train_loss == 0.0130);
  CHECK(row.train_auc == 0.9999);
  CHECK(row.val_loss == 0.6405);
  CHECK(row.val_auc == 0.5990);
  CHECK(row.best_epoch == 2);

  const ResultRow single = make_result_row("gru", {{0.3, 0.8, 0.6, 0.55}});
  CHECK(single == ResultRow{"gru", 0.3, 0.8, 0.6, 0.55, 1});
  CHECK_THROWS_AS(make_result_row("x", {}), DataError);

  SeededRng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    TrainHistory random;
    const auto epochs = 1 + rng.below(12);
    for (std::uint64_t e = 0; e < epochs; ++e) {
      random.push_back({rng.uniform(0, 2), rng.uniform(), rng.uniform(0, 2), rng.uniform()});
    }
    const ResultRow r = make_result_row("m", random);
    CHECK(r.val_auc >= 0.0);
    CHECK(r.val_auc <= 1.0);
    CHECK(r.train_auc >= 0.0);
    CHECK(r.train_auc <= 1.0);
    for (const auto& rec : random) CHECK(rec.val_auc <= r.val_auc);
  }
}
