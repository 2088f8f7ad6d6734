#include "stan/metrics/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "stan/errors.hpp"

namespace stan::metrics {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

void mean_stderr(const std::vector<double>& xs, double& mean, double& se) {
  mean = 0.0;
  se = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  se = sd / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace

json to_json(const MetricsReport& r) {
  json classes = json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"name", c.name},
                       {"ap", c.ap ? json(*c.ap) : json(nullptr)},
                       {"support", c.support},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1}});
  }
  json j{{"n_samples", r.n_samples}, {"classes", classes}, {"mAP", r.weighted_map},
         {"P_w", r.p_w},             {"R_w", r.r_w},         {"F1_w", r.f1_w}};
  j["accuracy"] = r.accuracy ? json(*r.accuracy) : json(nullptr);
  return j;
}

MetricsReport report_from_json(const json& j) {
  try {
    MetricsReport r;
    r.n_samples = j.at("n_samples").get<std::size_t>();
    for (const auto& c : j.at("classes")) {
      ClassReport cr;
      cr.name = c.at("name").get<std::string>();
      if (!c.at("ap").is_null()) cr.ap = c.at("ap").get<double>();
      cr.support = c.at("support").get<std::size_t>();
      cr.precision = c.at("precision").get<double>();
      cr.recall = c.at("recall").get<double>();
      cr.f1 = c.at("f1").get<double>();
      r.classes.push_back(std::move(cr));
    }
    r.weighted_map = j.at("mAP").get<double>();
    r.p_w = j.at("P_w").get<double>();
    r.r_w = j.at("R_w").get<double>();
    r.f1_w = j.at("F1_w").get<double>();
    if (j.contains("accuracy") && !j.at("accuracy").is_null()) r.accuracy = j.at("accuracy").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed metrics report: ") + e.what());
  }
}

std::string render_table(const MetricsReport& r, const std::string& title) {
  std::size_t name_w = 8;
  for (const auto& c : r.classes) name_w = std::max(name_w, c.name.size());
  std::ostringstream os;
  if (!title.empty()) os << title << "\n";
  os << pad("class", name_w, true) << "  " << pad("AP", 8) << pad("P", 8) << pad("R", 8) << pad("F1", 8)
     << pad("support", 9) << "\n";
  for (const auto& c : r.classes) {
    os << pad(c.name, name_w, true) << "  " << pad(c.ap ? fixed(*c.ap) : "n/a", 8) << pad(fixed(c.precision), 8)
       << pad(fixed(c.recall), 8) << pad(fixed(c.f1), 8) << pad(std::to_string(c.support), 9) << "\n";
  }
  os << "\n" << pad("", name_w, true) << "  " << pad("F1_w", 8) << pad("mAP", 8) << pad("P_w", 8) << pad("R_w", 8);
  if (r.accuracy) os << pad("acc", 8);
  os << "\n"
     << pad("weighted", name_w, true) << "  " << pad(fixed(r.f1_w), 8) << pad(fixed(r.weighted_map), 8)
     << pad(fixed(r.p_w), 8) << pad(fixed(r.r_w), 8);
  if (r.accuracy) os << pad(fixed(*r.accuracy), 8);
  os << "\n";
  return os.str();
}

RunSummary summarize_runs(const std::vector<MetricsReport>& reports) {
  RunSummary s;
  s.runs = reports.size();
  std::vector<double> m, f, p, rr, a;
  bool all_acc = !reports.empty();
  for (const auto& r : reports) {
    m.push_back(r.weighted_map);
    f.push_back(r.f1_w);
    p.push_back(r.p_w);
    rr.push_back(r.r_w);
    if (r.accuracy) a.push_back(*r.accuracy);
    else all_acc = false;
  }
  mean_stderr(m, s.map_mean, s.map_stderr);
  mean_stderr(f, s.f1_mean, s.f1_stderr);
  mean_stderr(p, s.p_mean, s.p_stderr);
  mean_stderr(rr, s.r_mean, s.r_stderr);
  s.has_accuracy = all_acc;
  if (all_acc) mean_stderr(a, s.acc_mean, s.acc_stderr);
  return s;
}

json to_json(const RunSummary& s) {
  json j{{"runs", s.runs},
         {"mAP", {{"mean", s.map_mean}, {"stderr", s.map_stderr}}},
         {"F1_w", {{"mean", s.f1_mean}, {"stderr", s.f1_stderr}}},
         {"P_w", {{"mean", s.p_mean}, {"stderr", s.p_stderr}}},
         {"R_w", {{"mean", s.r_mean}, {"stderr", s.r_stderr}}}};
  if (s.has_accuracy) j["accuracy"] = {{"mean", s.acc_mean}, {"stderr", s.acc_stderr}};
  return j;
}

std::string render_summary(const std::vector<std::string>& labels, const std::vector<RunSummary>& rows) {
  if (labels.size() != rows.size()) throw DimensionError("render_summary: label and row counts differ");
  std::size_t name_w = 6;
  for (const auto& l : labels) name_w = std::max(name_w, l.size());
  auto cell = [](double mean, double se, std::size_t runs) {
    return runs > 1 ? fixed(mean) + "+-" + fixed(se) : fixed(mean);
  };
  std::ostringstream os;
  os << pad("run", name_w, true) << "  " << pad("F1_w", 16) << pad("mAP", 16) << pad("P_w", 16) << pad("R_w", 16)
     << pad("acc", 16) << pad("n", 4) << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& s = rows[i];
    os << pad(labels[i], name_w, true) << "  " << pad(cell(s.f1_mean, s.f1_stderr, s.runs), 16)
       << pad(cell(s.map_mean, s.map_stderr, s.runs), 16) << pad(cell(s.p_mean, s.p_stderr, s.runs), 16)
       << pad(cell(s.r_mean, s.r_stderr, s.runs), 16)
       << pad(s.has_accuracy ? cell(s.acc_mean, s.acc_stderr, s.runs) : "-", 16) << pad(std::to_string(s.runs), 4)
       << "\n";
  }
  return os.str();
}

}  // namespace stan::metrics
