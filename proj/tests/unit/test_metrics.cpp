#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "metric_oracles.hpp"
#include "stan/errors.hpp"
#include "stan/metrics/metrics.hpp"
#include "stan/metrics/report.hpp"

using namespace stan;
using namespace stan::metrics;
using stan::testing::oracle_ap;

namespace {

using Labels = std::vector<std::uint8_t>;

EvalSet random_set(std::size_t n, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EvalSet s;
  s.n_samples = n;
  s.n_classes = c;
  for (std::size_t i = 0; i < n * c; ++i) {
    s.scores.push_back(u(rng));
    s.labels.push_back(u(rng) < 0.4 ? 1 : 0);
  }
  for (std::size_t k = 0; k < c; ++k) s.labels[k * c + k] = 1;  // every class has a positive
  return s;
}

}  // namespace

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(*average_precision(std::vector<double>{0.9, 0.8, 0.2, 0.1}, Labels{1, 1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(*average_precision(std::vector<double>{0.9, 0.8, 0.7, 0.6, 0.5}, Labels{0, 0, 0, 0, 1}), 1.0 / 5);
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
  const Labels l{1, 0, 1, 0};
  EXPECT_NEAR(*average_precision(s, l), 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(*oracle_ap(s, l), 5.0 / 6.0, 1e-15);
}

TEST(AveragePrecision, UndefinedWithoutPositives) {
  EXPECT_FALSE(average_precision(std::vector<double>{0.3, 0.2}, Labels{0, 0}).has_value());
  EXPECT_THROW(average_precision(std::vector<double>{0.3}, Labels{0, 1}), DimensionError);
}

TEST(AveragePrecision, TiesKeepOriginalOrder) {
  // Tied scores: the earlier sample ranks first.
  EXPECT_DOUBLE_EQ(*average_precision(std::vector<double>{0.5, 0.5}, Labels{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(*average_precision(std::vector<double>{0.5, 0.5}, Labels{0, 1}), 0.5);
}

TEST(AveragePrecision, InvariantUnderMonotoneTransform) {
  const EvalSet s = random_set(40, 1, 3);
  const auto base = *average_precision(s.scores, s.labels);
  std::vector<double> t;
  for (double x : s.scores) t.push_back(std::exp(3.0 * x) - 7.0);
  EXPECT_DOUBLE_EQ(*average_precision(t, s.labels), base);
}

TEST(WeightedMap, Examples) {
  const std::vector<std::optional<double>> aps{1.0, 0.5};
  EXPECT_DOUBLE_EQ(weighted_map(aps, std::vector<std::size_t>{3, 1}), 0.875);
  EXPECT_DOUBLE_EQ(weighted_map(aps, std::vector<std::size_t>{2, 2}), 0.75);
  const std::vector<std::optional<double>> three{1.0, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(weighted_map(three, std::vector<std::size_t>{1, 1, 0}), 0.75);
  const std::vector<std::optional<double>> undefined{std::nullopt, 0.4};
  EXPECT_DOUBLE_EQ(weighted_map(undefined, std::vector<std::size_t>{0, 5}), 0.4);
  const std::vector<std::optional<double>> none{std::nullopt, std::nullopt};
  EXPECT_THROW(weighted_map(none, std::vector<std::size_t>{0, 0}), ContractError);
}

TEST(WeightedMap, LiesBetweenMinAndMaxAp) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MetricsReport r = compute_report(random_set(30, 5, seed));
    double lo = 1.0, hi = 0.0;
    for (const auto& c : r.classes) {
      lo = std::min(lo, *c.ap);
      hi = std::max(hi, *c.ap);
    }
    EXPECT_GE(r.weighted_map, lo);
    EXPECT_LE(r.weighted_map, hi);
  }
}

TEST(WeightedPrf, PredictAllPositiveHasFullRecall) {
  EvalSet s = random_set(50, 4, 7);
  for (auto& x : s.scores) x = 1.0;
  const auto prf = weighted_prf(s);
  EXPECT_DOUBLE_EQ(prf.recall, 1.0);
}

TEST(WeightedPrf, PerfectPredictions) {
  EvalSet s = random_set(30, 3, 8);
  for (std::size_t i = 0; i < s.scores.size(); ++i) s.scores[i] = s.labels[i] ? 0.9 : 0.1;
  const auto prf = weighted_prf(s);
  EXPECT_DOUBLE_EQ(prf.precision, 1.0);
  EXPECT_DOUBLE_EQ(prf.recall, 1.0);
  EXPECT_DOUBLE_EQ(prf.f1, 1.0);
}

TEST(WeightedPrf, HandCase) {
  // class 0: preds 1,1,0,0 vs truth 1,0,1,0 -> P 1/2 R 1/2, support 2
  // class 1: preds 1,0,0,0 vs truth 1,1,1,0 -> P 1 R 1/3, support 3
  EvalSet s;
  s.n_samples = 4;
  s.n_classes = 2;
  s.scores = {0.9, 0.8, 0.6, 0.2, 0.1, 0.4, 0.3, 0.1};
  s.labels = {1, 1, 0, 1, 1, 1, 0, 0};
  const auto prf = weighted_prf(s);
  EXPECT_NEAR(prf.precision, (2 * 0.5 + 3 * 1.0) / 5, 1e-15);
  EXPECT_NEAR(prf.recall, (2 * 0.5 + 3 * (1.0 / 3)) / 5, 1e-15);
  EXPECT_NEAR(prf.f1, (2 * 0.5 + 3 * 0.5) / 5, 1e-15);
  for (const auto& c : prf.per_class) {
    EXPECT_NEAR(c.f1, 2 * c.precision * c.recall / (c.precision + c.recall), 1e-15);
  }
}

TEST(WeightedPrf, ClassWithoutPredictionsHasZeroPrecision) {
  EvalSet s;
  s.n_samples = 2;
  s.n_classes = 1;
  s.scores = {0.1, 0.2};
  s.labels = {1, 0};
  const auto prf = weighted_prf(s);
  EXPECT_EQ(prf.per_class[0].precision, 0.0);
  EXPECT_EQ(prf.per_class[0].f1, 0.0);
}

TEST(Oracles, ExhaustiveMicroInstances) {
  const auto r = stan::testing::sweep_micro_instances();
  EXPECT_EQ(r.instances, 256u * 24 * 24);
  EXPECT_EQ(r.mismatches, 0u) << "max error " << r.max_error;
}

TEST(Oracles, RandomLargerInstances) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const EvalSet s = random_set(25, 4, 100 + seed);
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(*average_precision(s.score_column(c), s.label_column(c)), *oracle_ap(s.score_column(c), s.label_column(c)), 1e-12);
    }
    const auto want = stan::testing::oracle_prf(s, 0.5);
    const auto got = weighted_prf(s, 0.5);
    EXPECT_NEAR(got.f1, want.f1, 1e-12);
  }
}

TEST(Accuracy, Examples) {
  const std::vector<double> scores{0.1, 0.7, 0.2, 0.9, 0.05, 0.05, 0.3, 0.3, 0.1};
  EXPECT_DOUBLE_EQ(top1_accuracy(scores, 3, std::vector<std::size_t>{1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(top1_accuracy(scores, 3, std::vector<std::size_t>{2, 1, 1}), 0.0);
  EXPECT_THROW(top1_accuracy(scores, 3, std::vector<std::size_t>{1}), DimensionError);
}

TEST(Accuracy, RandomScoresNearChance) {
  constexpr std::size_t n = 10000, c = 5;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, c - 1);
  std::vector<double> scores(n * c);
  std::vector<std::size_t> labels(n);
  for (auto& s : scores) s = u(rng);
  for (auto& l : labels) l = pick(rng);
  const double p = 1.0 / c;
  EXPECT_NEAR(top1_accuracy(scores, c, labels), p, 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Report, ShuffleInvariance) {
  const EvalSet s = random_set(40, 3, 11);
  const MetricsReport a = compute_report(s);
  std::vector<std::size_t> order(40);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), std::mt19937_64(5));
  EvalSet t = s;
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      t.scores[i * 3 + c] = s.scores[order[i] * 3 + c];
      t.labels[i * 3 + c] = s.labels[order[i] * 3 + c];
    }
  const MetricsReport b = compute_report(t);
  EXPECT_DOUBLE_EQ(a.weighted_map, b.weighted_map);
  EXPECT_DOUBLE_EQ(a.f1_w, b.f1_w);
  EXPECT_DOUBLE_EQ(a.p_w, b.p_w);
  EXPECT_DOUBLE_EQ(a.r_w, b.r_w);
}

TEST(Report, SupportsAndAccuracy) {
  EvalSet s;
  s.n_samples = 3;
  s.n_classes = 2;
  s.scores = {0.8, 0.1, 0.3, 0.6, 0.9, 0.2};
  s.labels = {1, 0, 0, 1, 1, 0};
  s.class_names = {"a", "b"};
  const auto r = compute_report(s);
  EXPECT_EQ(r.classes[0].support, 2u);
  EXPECT_EQ(r.classes[1].support, 1u);
  ASSERT_TRUE(r.accuracy.has_value());
  EXPECT_DOUBLE_EQ(*r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.weighted_map, 1.0);
  s.labels[1] = 1;
  EXPECT_FALSE(compute_report(s).accuracy.has_value());
}

TEST(Report, ValidationErrors) {
  EvalSet s;
  s.n_samples = 2;
  s.n_classes = 2;
  s.scores = {0.1, 0.2, 0.3};
  s.labels = {0, 1, 0, 1};
  EXPECT_THROW(compute_report(s), DimensionError);
  s.scores.push_back(0.4);
  s.labels[0] = 2;
  EXPECT_THROW(compute_report(s), ContractError);
}

TEST(Report, JsonRoundTripAndTable) {
  EvalSet s = random_set(20, 3, 2);
  s.class_names = {"drama", "comedy", "action"};
  const MetricsReport r = compute_report(s);
  const auto j = to_json(r);
  EXPECT_EQ(to_json(report_from_json(j)), j);
  EXPECT_TRUE(j.contains("mAP") && j.contains("F1_w") && j.contains("P_w") && j.contains("R_w"));
  const std::string table = render_table(r, "test");
  for (const char* col : {"F1_w", "mAP", "P_w", "R_w", "drama", "weighted"}) EXPECT_NE(table.find(col), std::string::npos) << col;
  EXPECT_LT(table.find("F1_w"), table.find("mAP"));
  EXPECT_THROW(report_from_json(nlohmann::json{{"mAP", 1}}), FormatError);
}

TEST(Report, RunSummaryMeanAndStderr) {
  std::vector<MetricsReport> runs(3);
  const double maps[3] = {0.5, 0.6, 0.7};
  for (int i = 0; i < 3; ++i) {
    runs[i].weighted_map = maps[i];
    runs[i].accuracy = 0.4;
  }
  const RunSummary s = summarize_runs(runs);
  EXPECT_EQ(s.runs, 3u);
  EXPECT_NEAR(s.map_mean, 0.6, 1e-15);
  EXPECT_NEAR(s.map_stderr, 0.1 / std::sqrt(3.0), 1e-15);
  EXPECT_TRUE(s.has_accuracy);
  EXPECT_NEAR(s.acc_stderr, 0.0, 1e-15);
  EXPECT_NE(render_summary({"run"}, {s}).find("0.6"), std::string::npos);
}
