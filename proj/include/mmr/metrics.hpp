#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

#include "mmr/errors.hpp"
#include "mmr/numerics.hpp"

namespace mmr {

struct MetricBundle {
  double accuracy = 0.0;
  double mAP = 0.0;
  double AUC = 0.0;
  double d_prime = 0.0;
  std::size_t num_classes = 0;
  /// Classes skipped in the AP / AUC averages (no positives, or no negatives).
  std::size_t skipped_ap = 0;
  std::size_t skipped_auc = 0;
};

/// Average precision with tie-aware thresholds: each positive contributes
/// the precision among all items scoring at least as high. Empty if the
/// column has no positives.
inline std::optional<double> average_precision(ConstSpan scores, ConstSpan positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t total_pos = 0;
  for (std::size_t i = 0; i < n; ++i) total_pos += positive[i] >= 0.5;
  if (total_pos == 0) return std::nullopt;
  double sum = 0.0;
  std::size_t seen = 0;
  std::size_t seen_pos = 0;
  for (std::size_t g = 0; g < n;) {
    std::size_t h = g;
    std::size_t group_pos = 0;
    while (h < n && scores[idx[h]] == scores[idx[g]]) group_pos += positive[idx[h++]] >= 0.5;
    seen += h - g;
    seen_pos += group_pos;
    sum += static_cast<double>(group_pos) * static_cast<double>(seen_pos) / static_cast<double>(seen);
    g = h;
  }
  return sum / static_cast<double>(total_pos);
}

/// ROC AUC via the Mann-Whitney rank statistic with mid-ranks for ties.
/// Empty if either class of the column is absent.
inline std::optional<double> roc_auc(ConstSpan scores, ConstSpan positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t g = 0; g < n;) {
    std::size_t h = g;
    while (h < n && scores[idx[h]] == scores[idx[g]]) ++h;
    const double mid_rank = 0.5 * static_cast<double>(g + 1 + h);
    for (std::size_t k = g; k < h; ++k)
      if (positive[idx[k]] >= 0.5) {
        pos_rank_sum += mid_rank;
        ++n_pos;
      }
    g = h;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double p = static_cast<double>(n_pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

inline double d_prime_from_auc(double auc) { return std::numbers::sqrt2 * normal_quantile(auc); }

/// Accuracy, mAP, macro AUC and d-prime for an n x K score matrix against
/// n x K labels. Accuracy is argmax agreement for single-label data and
/// exact thresholded agreement (score >= 0.5) for multi-label data.
inline MetricBundle eval_metrics(const Matrix& scores, const Matrix& labels, bool multi_label) {
  if (scores.rows != labels.rows || scores.cols != labels.cols) throw ShapeError("scores and labels differ in shape");
  if (scores.rows == 0) throw EmptyInputError("no samples to evaluate");
  const std::size_t n = scores.rows;
  const std::size_t k = scores.cols;
  MetricBundle b;
  b.num_classes = k;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!multi_label) {
      hit += argmax(scores.row(i)) == argmax(labels.row(i));
    } else {
      bool ok = true;
      for (std::size_t c = 0; c < k && ok; ++c) ok = (scores(i, c) >= 0.5) == (labels(i, c) >= 0.5);
      hit += ok;
    }
  }
  b.accuracy = static_cast<double>(hit) / static_cast<double>(n);

  double ap_sum = 0.0, auc_sum = 0.0;
  std::size_t ap_n = 0, auc_n = 0;
  Vector col_s(n), col_y(n);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      col_s[i] = scores(i, c);
      col_y[i] = labels(i, c);
    }
    if (auto ap = average_precision(col_s, col_y)) {
      ap_sum += *ap;
      ++ap_n;
    } else {
      ++b.skipped_ap;
    }
    if (auto auc = roc_auc(col_s, col_y)) {
      auc_sum += *auc;
      ++auc_n;
    } else {
      ++b.skipped_auc;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  b.mAP = ap_n ? ap_sum / static_cast<double>(ap_n) : nan;
  b.AUC = auc_n ? auc_sum / static_cast<double>(auc_n) : nan;
  b.d_prime = auc_n ? d_prime_from_auc(b.AUC) : nan;
  return b;
}

/// Relative performance loss (clean - attacked) / clean.
inline double drop_rate(double clean, double attacked) {
  if (clean == 0.0) throw DomainError("drop rate is undefined for zero clean performance");
  return (clean - attacked) / clean;
}

/// Per-class performance: accuracy among the class's samples for
/// single-label data, average precision of the class column for
/// multi-label data. Empty when undefined (no samples / positives).
inline std::vector<std::optional<double>> per_class_performance(const Matrix& scores, const Matrix& labels,
                                                                bool multi_label) {
  const std::size_t n = scores.rows, k = scores.cols;
  std::vector<std::optional<double>> out(k);
  if (multi_label) {
    Vector col_s(n), col_y(n);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        col_s[i] = scores(i, c);
        col_y[i] = labels(i, c);
      }
      out[c] = average_precision(col_s, col_y);
    }
    return out;
  }
  std::vector<std::size_t> total(k, 0), hit(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = argmax(labels.row(i));
    ++total[y];
    hit[y] += argmax(scores.row(i)) == y;
  }
  for (std::size_t c = 0; c < k; ++c)
    if (total[c]) out[c] = static_cast<double>(hit[c]) / static_cast<double>(total[c]);
  return out;
}

/// Spearman rank correlation with mid-ranks for ties.
inline double spearman(ConstSpan x, ConstSpan y) {
  auto ranks = [](ConstSpan v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    Vector r(v.size());
    for (std::size_t g = 0; g < idx.size();) {
      std::size_t h = g;
      while (h < idx.size() && v[idx[h]] == v[idx[g]]) ++h;
      for (std::size_t k = g; k < h; ++k) r[idx[k]] = 0.5 * static_cast<double>(g + h - 1);
      g = h;
    }
    return r;
  };
  if (x.size() != y.size() || x.size() < 2) throw DomainError("spearman needs two equal-length series");
  const Vector rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace mmr
