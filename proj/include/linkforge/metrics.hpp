#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linkforge/error.hpp"
#include "linkforge/graph.hpp"
#include "linkforge/injection.hpp"
#include "linkforge/tensor.hpp"

namespace linkforge {

inline std::size_t argmax_row(const Matrix& m, std::size_t i) {
  const auto row = m.row(i);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

/// Plain fraction of masked nodes whose argmax matches the label.
inline double masked_accuracy(const Matrix& logits, std::span<const int> labels, const NodeMask& mask) {
  std::size_t hit = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    ++total;
    hit += argmax_row(logits, i) == static_cast<std::size_t>(labels[i]) ? 1 : 0;
  }
  if (total == 0) fail(ErrorKind::invalid_argument, "accuracy over an empty mask");
  return static_cast<double>(hit) / static_cast<double>(total);
}

struct MacroAccuracy {
  double value = 0.0;
  std::vector<std::optional<double>> per_class;  // nullopt: class absent from mask
  std::vector<std::size_t> excluded_classes;
};

/// Unweighted mean over classes of per-class recall on the masked nodes.
/// Classes with no masked node are excluded and listed in the result.
inline MacroAccuracy accuracy_macro(const Matrix& logits, std::span<const int> labels, const NodeMask& mask) {
  const std::size_t c = logits.cols();
  std::vector<std::size_t> correct(c, 0), support(c, 0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= c) fail(ErrorKind::label, "label " + std::to_string(labels[i]) + " outside logits width");
    ++support[y];
    correct[y] += argmax_row(logits, i) == y ? 1 : 0;
  }
  MacroAccuracy out;
  out.per_class.resize(c);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < c; ++k) {
    if (support[k] == 0) {
      out.excluded_classes.push_back(k);
      continue;
    }
    out.per_class[k] = static_cast<double>(correct[k]) / static_cast<double>(support[k]);
    sum += *out.per_class[k];
    ++present;
  }
  if (present == 0) fail(ErrorKind::invalid_argument, "accuracy_macro: empty mask");
  out.value = sum / static_cast<double>(present);
  return out;
}

/// Mann-Whitney AUC with midranks for ties: P(score_pos > score_neg) + 0.5 P(tie).
inline double auc_binary(std::span<const double> scores, const std::vector<bool>& positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && scores[idx[hi + 1]] == scores[idx[lo]]) ++hi;
    const double mid = 0.5 * static_cast<double>(lo + hi) + 1.0;
    for (std::size_t k = lo; k <= hi; ++k) rank[idx[k]] = mid;
    lo = hi + 1;
  }
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!positive[i]) continue;
    pos += 1.0;
    rank_sum += rank[i];
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) fail(ErrorKind::invalid_argument, "AUC needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

/// One-vs-rest AUC per class, unweighted mean over classes present in the mask.
inline double auc_roc_macro(const Matrix& probabilities, std::span<const int> labels, const NodeMask& mask) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < probabilities.rows(); ++i)
    if (mask[i]) rows.push_back(i);
  std::vector<bool> present(probabilities.cols(), false);
  for (std::size_t i : rows) present[static_cast<std::size_t>(labels[i])] = true;
  const auto n_present = std::count(present.begin(), present.end(), true);
  if (n_present < 2) fail(ErrorKind::invalid_argument, "auc_roc_macro: mask covers fewer than two classes");

  double sum = 0.0;
  std::vector<double> scores(rows.size());
  std::vector<bool> positive(rows.size());
  for (std::size_t k = 0; k < probabilities.cols(); ++k) {
    if (!present[k]) continue;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      scores[r] = probabilities(rows[r], k);
      positive[r] = static_cast<std::size_t>(labels[rows[r]]) == k;
    }
    sum += auc_binary(scores, positive);
  }
  return sum / static_cast<double>(n_present);
}

struct ClassificationReport {
  double accuracy_macro = 0.0;
  double auc_roc_macro = 0.0;
  std::vector<std::optional<double>> per_class_accuracy;
};

inline ClassificationReport classification_report(const Matrix& logits, std::span<const int> labels,
                                                  const NodeMask& mask) {
  ClassificationReport r;
  MacroAccuracy acc = accuracy_macro(logits, labels, mask);
  r.accuracy_macro = acc.value;
  r.per_class_accuracy = std::move(acc.per_class);
  r.auc_roc_macro = auc_roc_macro(softmax_rows(logits), labels, mask);
  return r;
}

struct LinkPredReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.5;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Predicted positive iff S[i][j] >= threshold; confusion over pos and neg pairs.
/// Precision with no predicted positives is reported as 0.
inline LinkPredReport link_pred_report(const Matrix& scores, const std::vector<Edge>& pos,
                                       const std::vector<Edge>& neg, double threshold = 0.5) {
  if (pos.empty() || neg.empty()) fail(ErrorKind::invalid_argument, "link_pred_report needs positive and negative pairs");
  LinkPredReport r;
  r.threshold = threshold;
  auto score = [&](const Edge& e) {
    if (e.u >= scores.rows() || e.v >= scores.cols()) fail(ErrorKind::bounds, "pair outside score matrix");
    return scores(e.u, e.v);
  };
  for (const Edge& e : pos) (score(e) >= threshold ? r.tp : r.fn)++;
  for (const Edge& e : neg) (score(e) >= threshold ? r.fp : r.tn)++;
  const auto total = static_cast<double>(r.tp + r.fp + r.tn + r.fn);
  r.accuracy = static_cast<double>(r.tp + r.tn) / total;
  r.precision = r.tp + r.fp == 0 ? 0.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  return r;
}

struct InjectionQualityReport {
  std::size_t k = 0;
  std::size_t hits_total = 0;
  std::size_t hits_not_in_train = 0;
  double hit_rate_total = 0.0;
  double hit_rate_not_in_train = 0.0;
  std::optional<double> mean_rank;  // absent when there are no hits
  std::optional<double> mr_ratio;
  double neighbor_fraction = 0.0;
  double disconnected_fraction = 0.0;
};

/// Scores a ranked injection list against the observed graph.
/// `observed` and `train` hold directed pairs (undirected edges in both
/// orientations); `components` are connected-component ids of the observed
/// graph. A pair is a neighbour when it is an observed edge and
/// disconnected when its endpoints lie in different components.
inline InjectionQualityReport injection_quality(const std::vector<RankedLink>& ranked, const PairSet& observed,
                                                const PairSet& train, std::span<const std::size_t> components) {
  if (ranked.empty()) fail(ErrorKind::invalid_argument, "injection_quality: empty ranking (k = 0)");
  InjectionQualityReport r;
  r.k = ranked.size();
  double rank_sum = 0.0;
  std::size_t neighbors = 0, disconnected = 0;
  for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
    const RankedLink& link = ranked[pos];
    if (link.i >= components.size() || link.j >= components.size()) {
      fail(ErrorKind::bounds, "ranked pair outside the observed graph");
    }
    if (observed.contains(link.i, link.j)) {
      ++r.hits_total;
      ++neighbors;
      rank_sum += static_cast<double>(pos + 1);
      if (!train.contains(link.i, link.j)) ++r.hits_not_in_train;
    } else if (components[link.i] != components[link.j]) {
      ++disconnected;
    }
  }
  const auto k = static_cast<double>(r.k);
  r.hit_rate_total = static_cast<double>(r.hits_total) / k;
  r.hit_rate_not_in_train = static_cast<double>(r.hits_not_in_train) / k;
  if (r.hits_total > 0) {
    r.mean_rank = rank_sum / static_cast<double>(r.hits_total);
    r.mr_ratio = 1.0 - *r.mean_rank / k;
  }
  r.neighbor_fraction = static_cast<double>(neighbors) / k;
  r.disconnected_fraction = static_cast<double>(disconnected) / k;
  return r;
}

/// Hits of a ranking against an arbitrary directed target set.
inline std::size_t count_hits(const std::vector<RankedLink>& ranked, const PairSet& targets) {
  std::size_t hits = 0;
  for (const RankedLink& l : ranked) hits += targets.contains(l.i, l.j) ? 1 : 0;
  return hits;
}

}  // namespace linkforge
