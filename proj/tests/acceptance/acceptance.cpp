// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Usage: stan_acceptance [work_dir] [config_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "metric_oracles.hpp"
#include "stan/datagen/synthetic.hpp"
#include "stan/metrics/metrics.hpp"
#include "stan/model/config_json.hpp"
#include "stan/model/layers.hpp"
#include "stan/model/network.hpp"
#include "stan/model/positional.hpp"
#include "stan/model/stan_model.hpp"
#include "stan/numerics/ops.hpp"
#include "stan/scene/segmentation.hpp"
#include "stan/training/gradcheck.hpp"
#include "stan/training/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stan;
using num::Tensor;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_tensor(num::Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::size_t total = 1;
  for (auto d : shape) total *= d;
  std::vector<double> v(total);
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult stan_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::main_entry(args, out, err);
  return {code, out.str(), err.str()};
}

void require_ok(const CliResult& r, const std::string& what) {
  if (r.code != 0) throw std::runtime_error(what + " exited " + std::to_string(r.code) + ": " + r.err);
}

// ---------------------------------------------------------------------------

Verdict gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  train::GradcheckOptions opt;
  opt.coords_per_group = 100;
  const auto report = train::run_model_gradcheck(3, model::Fusion::sum, opt);
  const double secs = seconds_since(t0);
  // Groups smaller than 100 scalars are checked in full.
  model::Network net(train::gradcheck_network_config(3));
  bool enough = report.groups.size() == net.params().groups().size();
  for (const auto& g : report.groups) {
    enough = enough && g.coordinates == std::min<std::size_t>(100, net.params().scalar_count(g.group));
  }
  return {report.passed && report.max_rel_error < 1e-4 && secs < 120.0 && enough,
          "max rel err " + fmt(report.max_rel_error) + " over " + std::to_string(report.groups.size()) +
              " groups, " + fmt(secs) + " s"};
}

Verdict positional_conformance() {
  const std::size_t rows = 65, d = 64;
  const model::PositionalTable table = model::positional_embedding(rows - 1, d);
  double worst = 0.0;
  for (std::size_t pos = 0; pos < rows; ++pos)
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
      worst = std::max(worst, std::abs(table.entry(pos, 2 * i) - std::sin(angle)));
      worst = std::max(worst, std::abs(table.entry(pos, 2 * i + 1) - std::cos(angle)));
    }
  bool row0 = true;
  for (std::size_t j = 0; j < d; ++j) row0 = row0 && table.entry(0, j) == (j % 2 == 0 ? 0.0 : 1.0);

  // With projections, CLS vectors and input statistics at zero/identity, both
  // token sequences are the positional rows themselves.
  model::ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_layers = 1;
  cfg.n_classes = 3;
  cfg.max_scenes = 12;
  cfg.spatial_dim = 5;
  cfg.temporal_dim = 7;
  num::ParameterSet params;
  num::Rng rng(5);
  model::StanModel m(cfg, params, rng);
  for (const auto& p : params.all()) {
    if (p.group == "projections" || p.group == "cls") {
      Tensor v = p.value;
      for (auto& x : v.mutable_values()) x = 0.0;
    }
  }
  std::mt19937_64 g(11);
  const auto seqs = m.build_sequences(random_tensor({12, 5}, g), random_tensor({12, 7}, g));
  const Tensor expect = m.positional_table().rows(13);
  const auto same = [](const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
  };
  const bool shared = same(*seqs.spatial, *seqs.temporal) && same(*seqs.spatial, expect);
  return {worst <= 1e-12 && row0 && shared, "max |table - scalar| " + fmt(worst) + ", row0 " + (row0 ? "ok" : "bad") +
                                                 ", streams " + (shared ? "bitwise identical" : "differ")};
}

Verdict attention_oracle() {
  std::mt19937_64 rng(17);
  double worst = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5, dk = 2 + trial % 7, dv = 1 + trial % 5;
    const Tensor q = random_tensor({n, dk}, rng), k = random_tensor({n, dk}, rng), v = random_tensor({n, dv}, rng);
    const Tensor got = model::attention(q, k, v);
    const Tensor w = model::attention_weights(q, k);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(n);
      double mx = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dk; ++c) dot += q.at(i, c) * k.at(j, c);
        s[j] = dot / std::sqrt(static_cast<double>(dk));
        mx = std::max(mx, s[j]);
      }
      double z = 0.0;
      for (auto& x : s) z += (x = std::exp(x - mx));
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += w.at(i, j);
      worst_sum = std::max(worst_sum, std::abs(row - 1.0));
      for (std::size_t c = 0; c < dv; ++c) {
        double ref = 0.0;
        for (std::size_t j = 0; j < n; ++j) ref += s[j] / z * v.at(j, c);
        worst = std::max(worst, std::abs(ref - got.at(i, c)));
      }
    }
  }
  return {worst <= 1e-10 && worst_sum <= 1e-9,
          "200 instances, max |out - ref| " + fmt(worst) + ", max |row sum - 1| " + fmt(worst_sum)};
}

Verdict lambda_contract() {
  model::ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_layers = 2;
  cfg.n_classes = 4;
  cfg.max_scenes = 8;
  cfg.spatial_dim = 6;
  cfg.temporal_dim = 5;
  cfg.lambda = 0.0;
  num::ParameterSet params;
  num::Rng rng(2);
  model::StanModel m(cfg, params, rng);
  std::mt19937_64 g(23);
  bool invariant = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const Tensor s = random_tensor({n, 6}, g);
    const Tensor a = m.forward(m.build_sequences(s, random_tensor({n, 5}, g))).logits;
    Tensor t = random_tensor({n, 5}, g);
    for (auto& x : t.mutable_values()) x *= 1e3;
    const Tensor b = m.forward(m.build_sequences(s, t)).logits;
    invariant = invariant && std::equal(a.values().begin(), a.values().end(), b.values().begin());
  }
  const fs::path cfg_file = fs::temp_directory_path() / "stan_acceptance_lambda.json";
  std::ofstream(cfg_file) << R"({"d-model": 16, "heads": 2})";
  const double from_cli = cli::parse_args({"train", "--config", cfg_file.string(), "--data", "m.jsonl", "--out", "o"}).network.model.lambda;
  const double from_json = model::model_config_from_json(json::object()).lambda;
  const bool defaults = model::ModelConfig{}.lambda == 0.6 && from_json == 0.6 && from_cli == 0.6;
  return {invariant && defaults, std::string("lambda=0 logits ") + (invariant ? "bitwise invariant" : "changed") +
                                     " over 50 perturbations; default lambda " + fmt(from_cli) + " from config"};
}

train::Sample random_sample(const model::NetworkConfig& cfg, std::size_t n_scenes, std::mt19937_64& rng) {
  auto image = [&](std::size_t res) {
    scene::RgbImage img(res, res);
    for (auto& px : img.pixels) px = static_cast<std::uint8_t>(rng() % 256);
    return img;
  };
  train::Sample s;
  for (std::size_t k = 0; k < n_scenes; ++k) {
    scene::SceneSegment seg;
    seg.scene_index = k;
    for (std::size_t f = 0; f < cfg.pipeline.sampling.frames_per_scene; ++f) seg.clip.push_back(image(cfg.pipeline.sampling.low_res));
    seg.center_frame = image(cfg.pipeline.sampling.high_res);
    s.input.scenes.push_back(std::move(seg));
  }
  s.targets.assign(cfg.model.n_classes, 0.0);
  s.targets[rng() % cfg.model.n_classes] = 1.0;
  return s;
}

std::map<std::string, std::vector<std::vector<double>>> snapshot_groups(const num::ParameterSet& params) {
  std::map<std::string, std::vector<std::vector<double>>> out;
  for (const auto& p : params.all()) out[p.group].emplace_back(p.value.values().begin(), p.value.values().end());
  return out;
}

Verdict freeze() {
  auto config = [](model::Mode mode) {
    model::NetworkConfig cfg;
    cfg.seed = 4;
    cfg.model.d_model = 8;
    cfg.model.n_heads = 2;
    cfg.model.n_layers = 1;
    cfg.model.n_classes = 3;
    cfg.model.ffn_hidden = 16;
    cfg.model.q_hidden = 8;
    cfg.model.head_hidden = 6;
    cfg.model.spatial_dim = 4;
    cfg.model.temporal_dim = 4;
    cfg.model.mode = mode;
    cfg.encoder.channels = {3, 4};
    cfg.encoder.spatial_dim = 4;
    cfg.encoder.temporal_dim = 4;
    cfg.pipeline.sampling.low_res = 8;
    cfg.pipeline.sampling.high_res = 8;
    return cfg;
  };
  std::mt19937_64 rng(31);
  const auto small_cfg = config(model::Mode::small);
  std::vector<train::Sample> data;
  for (int i = 0; i < 8; ++i) data.push_back(random_sample(small_cfg, 2 + i % 3, rng));

  auto run = [&](model::Mode mode, std::size_t steps) {
    model::Network net(config(mode));
    train::Trainer t(net, train::TrainConfig{});
    const auto before = snapshot_groups(net.params());
    for (std::size_t s = 0; s < steps; ++s) {
      const std::vector<const train::Sample*> batch{&data[(2 * s) % 8], &data[(2 * s + 1) % 8]};
      t.train_step(batch);
    }
    std::map<std::string, bool> changed;
    const auto after = snapshot_groups(net.params());
    for (const auto& [g, v] : before) changed[g] = v != after.at(g);
    return changed;
  };
  const auto small = run(model::Mode::small, 100);
  const auto large = run(model::Mode::large, 100);
  const bool frozen = !small.at("temporal_encoder");
  std::string unchanged;
  for (const auto& [g, c] : large) {
    if (g == "input_stats") continue;  // fixed standardization buffer, never optimized
    if (!c) unchanged += " " + g;
  }
  return {frozen && unchanged.empty(),
          std::string("small: temporal encoder ") + (frozen ? "bitwise unchanged" : "CHANGED") + " after 100 steps; large: " +
              (unchanged.empty() ? "every trainable group changed" : "unchanged:" + unchanged)};
}

Verdict metric_oracles() {
  const auto sweep = stan::testing::sweep_micro_instances();
  std::mt19937_64 rng(41);
  bool full_recall = true;
  for (int trial = 0; trial < 100; ++trial) {
    metrics::EvalSet s;
    s.n_samples = 4 + rng() % 40;
    s.n_classes = 2 + rng() % 5;
    s.scores.assign(s.n_samples * s.n_classes, 1.0);
    s.labels.resize(s.scores.size());
    for (auto& l : s.labels) l = rng() % 3 == 0;
    s.labels[0] = 1;
    full_recall = full_recall && metrics::weighted_prf(s).recall == 1.0;
  }
  return {sweep.mismatches == 0 && sweep.instances > 0 && full_recall,
          std::to_string(sweep.instances) + " micro-instances, " + std::to_string(sweep.mismatches) +
              " mismatches (max err " + fmt(sweep.max_error) + "); predict-all R_w " + (full_recall ? "= 1" : "!= 1")};
}

double class_ap(const json& metrics, const std::string& name) {
  for (const auto& c : metrics.at("classes")) {
    if (c.at("name") == name) return c.at("ap").get<double>();
  }
  throw std::runtime_error("class " + name + " missing from metrics");
}

// 4 classes (one temporal-twin pair), 512 train / 128 test, generated once per run.
fs::path synthetic_data(const fs::path& work) {
  static bool generated = false;
  const fs::path data = work / "e2e_data";
  if (!generated) {
    fs::remove_all(data);
    require_ok(stan_cli({"datagen", "--classes", "4", "--samples", "512", "--test-samples", "128", "--seed", "2024",
                         "--out", data.string()}),
               "datagen");
    generated = true;
  }
  return data;
}

Verdict end_to_end(const fs::path& work, const fs::path& config) {
  const fs::path data = synthetic_data(work);
  const std::string train_m = (data / "train.jsonl").string(), test_m = (data / "test.jsonl").string();

  const fs::path full = work / "e2e_stan";
  fs::remove_all(full);
  const auto t0 = std::chrono::steady_clock::now();
  require_ok(stan_cli({"train", "--config", config.string(), "--data", train_m, "--val", test_m, "--out", full.string(),
                       "--epochs", "30", "--seed", "1"}),
             "train");
  const double secs = seconds_since(t0);
  const double stan_map = json::parse(slurp(full / "metrics.json")).at("mAP").get<double>();

  const fs::path spatial = work / "e2e_spatial";
  fs::remove_all(spatial);
  require_ok(stan_cli({"train", "--config", config.string(), "--data", train_m, "--val", test_m, "--out", spatial.string(),
                       "--epochs", "30", "--seed", "1", "--streams", "spatial"}),
             "spatial-only train");
  const json sp = json::parse(slurp(spatial / "metrics.json"));
  const double ap_right = class_ap(sp, "move_right"), ap_left = class_ap(sp, "move_left");

  const fs::path shuffled = work / "e2e_shuffled";
  fs::remove_all(shuffled);
  require_ok(stan_cli({"eval", "--ckpt", (full / "last.ckpt").string(), "--data", test_m, "--out", shuffled.string(),
                       "--shuffle-scenes", "5"}),
             "shuffled eval");
  const double shuffled_map = json::parse(slurp(shuffled / "metrics.json")).at("mAP").get<double>();
  const double drop = stan_map - shuffled_map;

  const bool ok = stan_map >= 0.90 && secs < 900.0 && ap_right <= 0.75 && ap_left <= 0.75 && drop >= 0.05;
  return {ok, "test mAP " + fmt(stan_map) + " after 30 epochs in " + fmt(secs) + " s; spatial-only twin AP " + fmt(ap_right) +
                  "/" + fmt(ap_left) + "; shuffled mAP " + fmt(shuffled_map) + " (drop " + fmt(drop) + ")"};
}

Verdict subsample_plumbing(const fs::path& work, const fs::path& config) {
  const fs::path out = work / "subsample";
  fs::remove_all(out);
  const fs::path manifest = synthetic_data(work) / "train.jsonl";
  const auto r = stan_cli({"train", "--config", config.string(), "--data", manifest.string(), "--out", out.string(),
                           "--subsample", "64", "--epochs", "2", "--eval-every", "1", "--seed", "9"});
  require_ok(r, "subsampled train");
  const json run = json::parse(slurp(out / "run.json"));
  std::vector<json> log;
  std::istringstream lines(slurp(out / "train_log.jsonl"));
  for (std::string l; std::getline(lines, l);) {
    if (!l.empty()) log.push_back(json::parse(l));
  }
  const std::size_t batch = run.at("train").at("batch_size").get<std::size_t>();
  const std::size_t per_epoch = (64 + batch - 1) / batch;
  const bool ok = r.out.find("training on 64 of 512 entries") != std::string::npos && run.at("data").at("subsample") == 64 &&
                  run.at("data").at("used") == 64 && run.at("data").at("loaded") == 64 && log.size() == 2 &&
                  log[0].at("step") == per_epoch && log[1].at("step") == 2 * per_epoch && fs::exists(out / "last.ckpt");
  return {ok, "64 of 512 entries, " + std::to_string(log.size()) + " log lines, " +
                  (log.empty() ? std::string("no steps") : std::to_string(log.back().at("step").get<std::size_t>()) + " steps")};
}

Verdict scene_detector() {
  std::size_t true_cuts = 0, found = 0, correct = 0, videos = 0;
  for (std::size_t classes : {4u, 8u}) {
    datagen::SyntheticSpec spec;
    spec.n_classes = classes;
    for (std::uint64_t seed = 0; seed < 100; ++seed, ++videos) {
      const auto v = datagen::generate_video(spec, std::vector<std::size_t>{seed % classes}, 1000 * classes + seed);
      const auto got = scene::detect_scenes(v.video, scene::CutDetectorConfig{});
      std::vector<std::size_t> want_cuts, got_cuts;
      for (std::size_t k = 1; k < v.scenes.size(); ++k) want_cuts.push_back(v.scenes[k].start);
      for (std::size_t k = 1; k < got.size(); ++k) got_cuts.push_back(got[k].start);
      true_cuts += want_cuts.size();
      found += got_cuts.size();
      for (auto c : got_cuts) correct += std::count(want_cuts.begin(), want_cuts.end(), c);
    }
  }
  const double precision = found ? static_cast<double>(correct) / found : 0.0;
  const double recall = true_cuts ? static_cast<double>(correct) / true_cuts : 0.0;

  std::mt19937_64 rng(51);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    scene::FrameSequence video;
    video.video_id = "random";
    const std::size_t n = 1 + rng() % 150;
    const std::size_t res = 2 + rng() % 6;
    for (std::size_t f = 0; f < n; ++f) {
      scene::RgbImage img(res, res);
      const int base = static_cast<int>(rng() % 256), spread = static_cast<int>(rng() % 64);
      for (auto& px : img.pixels) px = static_cast<std::uint8_t>(std::clamp(base + static_cast<int>(rng() % (2 * spread + 1)) - spread, 0, 255));
      video.frames.push_back(std::move(img));
    }
    scene::CutDetectorConfig cfg;
    cfg.window = 1 + rng() % 20;
    cfg.min_scene_len = rng() % 15;
    cfg.threshold = 0.01 + static_cast<double>(rng() % 100) / 200.0;
    const auto b = scene::detect_scenes(video, cfg);
    bool ok = !b.empty() && b.front().start == 0 && b.back().end == n;
    for (std::size_t k = 0; ok && k < b.size(); ++k) ok = b[k].end > b[k].start && (k == 0 || b[k].start == b[k - 1].end);
    if (!ok) ++violations;
  }
  return {precision == 1.0 && recall == 1.0 && violations == 0,
          std::to_string(videos) + " synthetic videos, " + std::to_string(true_cuts) + " cuts: precision " + fmt(precision) +
              ", recall " + fmt(recall) + "; partition violations " + std::to_string(violations) + "/1000"};
}

Verdict determinism(const fs::path& work, const fs::path& config) {
  const fs::path manifest = synthetic_data(work) / "train.jsonl";
  std::vector<fs::path> runs{work / "det_a", work / "det_b"};
  for (const auto& dir : runs) {
    fs::remove_all(dir);
    require_ok(stan_cli({"train", "--config", config.string(), "--data", manifest.string(), "--out", dir.string(),
                         "--subsample", "48", "--epochs", "3", "--eval-every", "1", "--seed", "13", "--mode", "large"}),
               "train " + dir.filename().string());
  }
  std::string differ;
  for (const char* f : {"best.ckpt", "last.ckpt", "train_log.jsonl"}) {
    if (slurp(runs[0] / f) != slurp(runs[1] / f)) differ += std::string(" ") + f;
  }
  return {differ.empty(), differ.empty() ? "best.ckpt, last.ckpt and train_log.jsonl bitwise identical" : "differ:" + differ};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "stan_acceptance";
  const fs::path config_dir = argc > 2 ? fs::path(argv[2]) : fs::path(STAN_CONFIG_DIR);
  const fs::path e2e_config = config_dir / "synthetic_e2e.json";
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"positional embedding conformance", positional_conformance},
      {"attention oracle", attention_oracle},
      {"lambda contract", lambda_contract},
      {"small-mode freeze", freeze},
      {"metric oracles", metric_oracles},
      {"end-to-end temporal learning", [&] { return end_to_end(work, e2e_config); }},
      {"reduced-data protocol plumbing", [&] { return subsample_plumbing(work, e2e_config); }},
      {"scene detector", scene_detector},
      {"training determinism", [&] { return determinism(work, e2e_config); }},
  };

  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << name << ": " << v.detail << " [" << fmt(seconds_since(t0)) << " s]"
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
