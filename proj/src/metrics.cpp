#include "maxcorr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "maxcorr/error.hpp"

namespace maxcorr {

namespace {

// 1-based midranks of `x` (average rank within tie groups).
std::vector<double> midranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mid;
    i = j + 1;
  }
  return r;
}

void check_inputs(std::span<const double> scores, std::span<const int> labels, const char* who) {
  if (scores.size() != labels.size())
    throw DataError(std::string(who) + ": " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  for (int l : labels)
    if (l != 0 && l != 1) throw DataError(std::string(who) + ": labels must be 0/1");
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "auroc");
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auroc: labels contain a single class");
  const auto r = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (labels[i] == 1) rank_sum += r[i];
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

Matrix softmax_scores(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += (out(i, j) = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < row.size(); ++j) out(i, j) /= s;
  }
  return out;
}

RocResult multiclass_auroc(const Matrix& scores, std::span<const std::size_t> labels) {
  if (scores.rows() != labels.size())
    throw DataError("multiclass_auroc: " + std::to_string(scores.rows()) + " score rows vs " +
                    std::to_string(labels.size()) + " labels");
  const std::size_t c = scores.cols();
  for (std::size_t l : labels)
    if (l >= c) throw DataError("multiclass_auroc: label " + std::to_string(l) + " out of range");
  RocResult res;
  res.per_class_auc.assign(c, std::numeric_limits<double>::quiet_NaN());
  res.defined.assign(c, false);
  res.n_pos.assign(c, 0);
  res.n_neg.assign(c, 0);
  res.weights.assign(c, 0.0);
  std::vector<double> col(scores.rows());
  std::vector<int> bin(scores.rows());
  double weight_total = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      col[i] = scores(i, k);
      bin[i] = labels[i] == k ? 1 : 0;
    }
    res.n_pos[k] = static_cast<std::size_t>(std::count(bin.begin(), bin.end(), 1));
    res.n_neg[k] = bin.size() - res.n_pos[k];
    if (res.n_pos[k] == 0 || res.n_neg[k] == 0) {
      res.has_undefined = true;
      continue;
    }
    res.defined[k] = true;
    res.per_class_auc[k] = auroc(col, bin);
    weight_total += static_cast<double>(res.n_pos[k]);
  }
  if (weight_total == 0.0) {
    res.weighted_auc = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  for (std::size_t k = 0; k < c; ++k)
    if (res.defined[k]) {
      res.weights[k] = static_cast<double>(res.n_pos[k]) / weight_total;
      res.weighted_auc += res.weights[k] * res.per_class_auc[k];
    }
  return res;
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

DeLongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const int> labels) {
  check_inputs(scores_a, labels, "delong_test");
  check_inputs(scores_b, labels, "delong_test");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  const std::size_t m = pos.size(), n = neg.size();
  if (m < 2 || n < 2) throw DataError("delong_test: need at least 2 positives and 2 negatives");

  // Structural components (Sun & Xu): V10 over positives, V01 over negatives.
  struct Components {
    double auc;
    std::vector<double> v10, v01;
  };
  auto components = [&](std::span<const double> s) {
    std::vector<double> sp, sn;
    for (std::size_t i : pos) sp.push_back(s[i]);
    for (std::size_t i : neg) sn.push_back(s[i]);
    std::vector<double> all(sp);
    all.insert(all.end(), sn.begin(), sn.end());
    const auto r_all = midranks(all);
    const auto r_pos = midranks(sp);
    const auto r_neg = midranks(sn);
    Components c;
    c.v10.resize(m);
    c.v01.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      c.v10[i] = (r_all[i] - r_pos[i]) / static_cast<double>(n);
      sum += r_all[i];
    }
    for (std::size_t j = 0; j < n; ++j) c.v01[j] = 1.0 - (r_all[m + j] - r_neg[j]) / static_cast<double>(m);
    const double md = static_cast<double>(m);
    c.auc = (sum - md * (md + 1.0) / 2.0) / (md * static_cast<double>(n));
    return c;
  };
  const Components a = components(scores_a);
  const Components b = components(scores_b);

  auto cov = [](const std::vector<double>& x, const std::vector<double>& y) {
    const double k = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / (k - 1.0);
  };
  const double s10 = cov(a.v10, a.v10) + cov(b.v10, b.v10) - 2.0 * cov(a.v10, b.v10);
  const double s01 = cov(a.v01, a.v01) + cov(b.v01, b.v01) - 2.0 * cov(a.v01, b.v01);

  DeLongResult res;
  res.auc_a = a.auc;
  res.auc_b = b.auc;
  res.auc_diff = a.auc - b.auc;
  res.variance = std::max(0.0, s10 / static_cast<double>(m) + s01 / static_cast<double>(n));
  if (res.variance <= 1e-15) {
    res.degenerate = true;
    if (res.auc_diff == 0.0) {
      res.z_stat = 0.0;
      res.p_value = 1.0;
    } else {
      res.z_stat = std::copysign(std::numeric_limits<double>::infinity(), res.auc_diff);
      res.p_value = 0.0;
    }
    return res;
  }
  res.z_stat = res.auc_diff / std::sqrt(res.variance);
  res.p_value = std::clamp(normal_two_sided_p(res.z_stat), 0.0, 1.0);
  return res;
}

}  // namespace maxcorr
