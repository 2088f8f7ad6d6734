#include "stan/metrics/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "stan/errors.hpp"

namespace stan::metrics {

void EvalSet::validate() const {
  if (scores.size() != n_samples * n_classes || labels.size() != n_samples * n_classes) {
    throw DimensionError("eval set holds " + std::to_string(scores.size()) + " scores and " +
                         std::to_string(labels.size()) + " labels for " + std::to_string(n_samples) + " x " +
                         std::to_string(n_classes));
  }
  if (!class_names.empty() && class_names.size() != n_classes) {
    throw DimensionError("eval set has " + std::to_string(class_names.size()) + " class names for " +
                         std::to_string(n_classes) + " classes");
  }
  for (auto l : labels) {
    if (l > 1) throw ContractError("labels must be 0 or 1");
  }
}

std::vector<double> EvalSet::score_column(std::size_t c) const {
  std::vector<double> col(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) col[i] = scores[i * n_classes + c];
  return col;
}

std::vector<std::uint8_t> EvalSet::label_column(std::size_t c) const {
  std::vector<std::uint8_t> col(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) col[i] = labels[i * n_classes + c];
  return col;
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("average_precision: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

double weighted_map(std::span<const std::optional<double>> per_class_ap, std::span<const std::size_t> supports) {
  if (per_class_ap.size() != supports.size()) throw DimensionError("weighted_map: AP and support lengths differ");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t c = 0; c < supports.size(); ++c) {
    if (!per_class_ap[c] || supports[c] == 0) continue;
    num += static_cast<double>(supports[c]) * *per_class_ap[c];
    den += static_cast<double>(supports[c]);
  }
  if (den == 0.0) throw ContractError("weighted_map: every class is undefined (no positives)");
  return num / den;
}

WeightedPrf weighted_prf(const EvalSet& set, double threshold) {
  set.validate();
  WeightedPrf out;
  out.per_class.resize(set.n_classes);
  double total = 0.0;
  for (std::size_t c = 0; c < set.n_classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < set.n_samples; ++i) {
      const bool pred = set.scores[i * set.n_classes + c] >= threshold;
      const bool truth = set.labels[i * set.n_classes + c] != 0;
      if (pred && truth) ++tp;
      else if (pred) ++fp;
      else if (truth) ++fn;
    }
    ClassPrf& k = out.per_class[c];
    k.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    k.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    k.f1 = k.precision + k.recall > 0.0 ? 2.0 * k.precision * k.recall / (k.precision + k.recall) : 0.0;
    const double support = static_cast<double>(tp + fn);
    out.precision += support * k.precision;
    out.recall += support * k.recall;
    out.f1 += support * k.f1;
    total += support;
  }
  if (total > 0.0) {
    out.precision /= total;
    out.recall /= total;
    out.f1 /= total;
  }
  return out;
}

double top1_accuracy(std::span<const double> scores, std::size_t n_classes, std::span<const std::size_t> labels) {
  if (n_classes == 0 || scores.size() != labels.size() * n_classes) {
    throw DimensionError("top1_accuracy: scores do not match labels x classes");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
      if (scores[i * n_classes + c] > scores[i * n_classes + best]) best = c;
    }
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

MetricsReport compute_report(const EvalSet& set, double threshold) {
  set.validate();
  MetricsReport r;
  r.n_samples = set.n_samples;
  const WeightedPrf prf = weighted_prf(set, threshold);
  std::vector<std::optional<double>> aps(set.n_classes);
  std::vector<std::size_t> supports(set.n_classes, 0);
  for (std::size_t c = 0; c < set.n_classes; ++c) {
    const auto labels = set.label_column(c);
    aps[c] = average_precision(set.score_column(c), labels);
    supports[c] = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    ClassReport cr;
    cr.name = set.class_names.empty() ? "class_" + std::to_string(c) : set.class_names[c];
    cr.ap = aps[c];
    cr.support = supports[c];
    cr.precision = prf.per_class[c].precision;
    cr.recall = prf.per_class[c].recall;
    cr.f1 = prf.per_class[c].f1;
    r.classes.push_back(std::move(cr));
  }
  r.weighted_map = weighted_map(aps, supports);
  r.p_w = prf.precision;
  r.r_w = prf.recall;
  r.f1_w = prf.f1;

  std::vector<std::size_t> single(set.n_samples);
  bool single_label = set.n_samples > 0;
  for (std::size_t i = 0; i < set.n_samples && single_label; ++i) {
    std::size_t count = 0;
    for (std::size_t c = 0; c < set.n_classes; ++c) {
      if (set.labels[i * set.n_classes + c]) {
        ++count;
        single[i] = c;
      }
    }
    single_label = count == 1;
  }
  if (single_label) r.accuracy = top1_accuracy(set.scores, set.n_classes, single);
  return r;
}

}  // namespace stan::metrics
