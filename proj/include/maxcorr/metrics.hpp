#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "maxcorr/matrix.hpp"

namespace maxcorr {

/// Mann-Whitney AUROC with midranks (ties count one half).
/// Throws DataError when labels contain a single class.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct RocResult {
  std::vector<double> per_class_auc;  // NaN where undefined
  std::vector<bool> defined;
  std::vector<std::size_t> n_pos;
  std::vector<std::size_t> n_neg;
  std::vector<double> weights;  // renormalized over defined classes
  double weighted_auc = 0.0;
  bool has_undefined = false;
};

/// One-vs-rest AUROC per column of `scores` (N x C), weighted by empirical
/// class frequency. Classes without positives or negatives are reported as
/// undefined and excluded from the weighted average.
RocResult multiclass_auroc(const Matrix& scores, std::span<const std::size_t> labels);

/// Row-wise softmax of logits; the score matrix used for reports.
Matrix softmax_scores(const Matrix& logits);

struct DeLongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double auc_diff = 0.0;
  double variance = 0.0;
  double z_stat = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // variance vanished
};

/// Paired DeLong test of two correlated AUROCs on the same sample, using the
/// midrank structural components. Needs >= 2 positives and >= 2 negatives.
DeLongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const int> labels);

inline constexpr double kSignificanceLevel = 0.01;

/// Two-sided standard normal tail probability.
double normal_two_sided_p(double z);

}  // namespace maxcorr
