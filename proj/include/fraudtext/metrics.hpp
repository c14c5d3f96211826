// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fraudtext/error.hpp"
#include "fraudtext/tensor.hpp"

namespace fraudtext {

/**
 * Area under the ROC curve in the Mann-Whitney form: the fraction of
 * (positive, negative) pairs where the positive scores higher, ties counting
 * one half. Computed from midranks in O(N log N).
 * Throws MetricError unless both classes are present, ShapeError on length
 * mismatch.
 */
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

/// One point per distinct threshold, from (0,0) to (1,1).
std::vector<RocPoint> roc_points(const std::vector<double>& scores, const std::vector<int>& labels);

/// Trapezoidal area under a point list.
double trapezoid_area(const std::vector<RocPoint>& points);

// ------------------------------------------------------------------ history

struct EpochRecord {
  double train_loss = 0.0;
  double train_auc = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

using TrainHistory = std::vector<EpochRecord>;

/// 1-based epoch with the highest val_auc, the earliest one on ties.
/// Throws DataError on an empty history.
std::pair<Index, EpochRecord> best_epoch(const TrainHistory& history);

struct ResultRow {
  std::string model_name;
  double train_loss = 0.0;
  double train_auc = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;
  Index best_epoch = 0;
  bool operator==(const ResultRow&) const = default;
};

ResultRow make_result_row(const std::string& name, const TrainHistory& history);

}  // namespace fraudtext
