// SPDX-License-Identifier: Apache-2.0
#include "fraudtext/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace fraudtext {

namespace {

struct ClassCounts {
  Index positives = 0;
  Index negatives = 0;
};

ClassCounts check_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("auc: " + std::to_string(scores.size()) + " scores but " +
                     std::to_string(labels.size()) + " labels");
  }
  ClassCounts c;
  for (int y : labels) {
    if (y == 1) {
      ++c.positives;
    } else if (y == 0) {
      ++c.negatives;
    } else {
      throw MetricError("auc: label " + std::to_string(y) + " is not 0 or 1");
    }
  }
  if (c.positives == 0 || c.negatives == 0) {
    throw MetricError("auc is undefined with " + std::to_string(c.positives) + " positive and " +
                      std::to_string(c.negatives) + " negative samples");
  }
  return c;
}

std::vector<std::size_t> order_by_score(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const ClassCounts c = check_inputs(scores, labels);
  const auto order = order_by_score(scores);
  // Twice the positive rank sum keeps every midrank an integer.
  long long twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const long long twice_midrank = static_cast<long long>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) twice_rank_sum += twice_midrank;
    }
    i = j;
  }
  const long long twice_u = twice_rank_sum - static_cast<long long>(c.positives) * (c.positives + 1);
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(c.positives) * static_cast<double>(c.negatives));
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  const ClassCounts c = check_inputs(scores, labels);
  auto order = order_by_score(scores);
  std::reverse(order.begin(), order.end());
  std::vector<RocPoint> points{{0.0, 0.0}};
  Index tp = 0;
  Index fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    points.push_back({static_cast<double>(fp) / static_cast<double>(c.negatives),
                      static_cast<double>(tp) / static_cast<double>(c.positives)});
    i = j;
  }
  return points;
}

double trapezoid_area(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    area += (points[k].fpr - points[k - 1].fpr) * (points[k].tpr + points[k - 1].tpr) * 0.5;
  }
  return area;
}

std::pair<Index, EpochRecord> best_epoch(const TrainHistory& history) {
  if (history.empty()) throw DataError("best_epoch: empty training history");
  std::size_t best = 0;
  for (std::size_t e = 1; e < history.size(); ++e) {
    if (history[e].val_auc > history[best].val_auc) best = e;
  }
  return {static_cast<Index>(best) + 1, history[best]};
}

ResultRow make_result_row(const std::string& name, const TrainHistory& history) {
  const auto [epoch, rec] = best_epoch(history);
  return ResultRow{name, rec.train_loss, rec.train_auc, rec.val_loss, rec.val_auc, epoch};
}

}  // namespace fraudtext
