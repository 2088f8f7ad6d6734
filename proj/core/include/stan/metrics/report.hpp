#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stan/metrics/metrics.hpp"

namespace stan::metrics {

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

// Aligned text table: one row per class, then the weighted aggregates with
// the columns F1_w, mAP, P_w, R_w.
std::string render_table(const MetricsReport& report, const std::string& title = "");

// Mean and standard error of the aggregates over independent runs.
struct RunSummary {
  std::size_t runs = 0;
  double map_mean = 0.0, map_stderr = 0.0;
  double f1_mean = 0.0, f1_stderr = 0.0;
  double p_mean = 0.0, p_stderr = 0.0;
  double r_mean = 0.0, r_stderr = 0.0;
  bool has_accuracy = false;
  double acc_mean = 0.0, acc_stderr = 0.0;
};

RunSummary summarize_runs(const std::vector<MetricsReport>& reports);
nlohmann::json to_json(const RunSummary& summary);
std::string render_summary(const std::vector<std::string>& labels, const std::vector<RunSummary>& rows);

}  // namespace stan::metrics
