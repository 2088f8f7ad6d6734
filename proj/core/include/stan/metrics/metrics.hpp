#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stan::metrics {

// Scores and multi-hot labels, both row-major [n_samples x n_classes].
struct EvalSet {
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<std::string> class_names;

  void validate() const;
  std::vector<double> score_column(std::size_t c) const;
  std::vector<std::uint8_t> label_column(std::size_t c) const;
};

// Step-wise average precision: samples ranked by descending score (ties keep
// their original order), AP = mean precision at the rank of each positive.
// nullopt when there are no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

// sum(support * AP) / sum(support) over classes with a defined AP and
// positive support. Throws ContractError when no class qualifies.
double weighted_map(std::span<const std::optional<double>> per_class_ap, std::span<const std::size_t> supports);

struct ClassPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct WeightedPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<ClassPrf> per_class;
};

// A sample predicts class c when score >= threshold. Per-class values are
// averaged with support weights. A class without predicted positives has
// precision 0; F1 is 0 when precision and recall are both 0.
WeightedPrf weighted_prf(const EvalSet& set, double threshold = 0.5);

// Fraction of samples whose arg-max score (lowest index on ties) equals the
// label.
double top1_accuracy(std::span<const double> scores, std::size_t n_classes, std::span<const std::size_t> labels);

struct ClassReport {
  std::string name;
  std::optional<double> ap;
  std::size_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  std::size_t n_samples = 0;
  std::vector<ClassReport> classes;
  double weighted_map = 0.0;
  double p_w = 0.0;
  double r_w = 0.0;
  double f1_w = 0.0;
  std::optional<double> accuracy;  // single-label sets only
};

// Full report. Accuracy is filled in when every sample has exactly one
// positive label.
MetricsReport compute_report(const EvalSet& set, double threshold = 0.5);

}  // namespace stan::metrics
