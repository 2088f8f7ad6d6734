#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "stan/errors.hpp"
#include "stan/metrics/report.hpp"
#include "stan/model/config_json.hpp"
#include "stan/training/checkpoint.hpp"
#include "stan/training/dataset.hpp"

namespace stan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class Parse>
CLI::Validator enum_check(Parse parse, const std::string& values) {
  return CLI::Validator(
      [parse](std::string& v) {
        try {
          parse(v);
          return std::string();
        } catch (const ContractError& e) {
          return std::string(e.what());
        }
      },
      values);
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw CLI::ValidationError("--channels", "'" + s + "' is not a comma-separated list of sizes");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw CLI::ValidationError("--channels", "empty channel list");
  return out;
}

void add_config(CLI::App* s, Command& c) {
  s->add_option("--config", c.config, "JSON object of flag values keyed by flag name; command-line flags take precedence");
}

void add_io(CLI::App* s, Command& c, const std::string& out_help) {
  s->add_option("--out", c.out, out_help);
  s->add_option("--seed", c.seed, "Seed for every random choice")->capture_default_str();
  s->add_option("--workers", c.workers, "Maximum number of worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_detector(CLI::App* s, Command& c) {
  auto& d = c.network.pipeline.detector;
  s->add_option("--cut-window", d.window, "Frames in the running intensity mean of the cut detector")->capture_default_str();
  s->add_option("--cut-threshold", d.threshold, "Intensity deviation that starts a new scene")->capture_default_str();
  s->add_option("--min-scene-len", d.min_scene_len, "Minimum scene length in frames")->capture_default_str();
  s->add_option("--analysis-res", d.analysis_res, "Side length frames are resized to before measuring intensity (0 keeps the native size)")
      ->capture_default_str();
}

void add_encoder(CLI::App* s, Command& c) {
  auto& n = c.network;
  s->add_option_function<std::string>(
       "--channels", [&n](const std::string& v) { n.encoder.channels = parse_size_list(v); },
       "Comma-separated channel widths of the convolutional encoders")
      ->default_str("16,32,64");
  s->add_option("--spatial-dim", n.model.spatial_dim, "Spatial feature dimension")->capture_default_str();
  s->add_option("--temporal-dim", n.model.temporal_dim, "Temporal feature dimension")->capture_default_str();
  s->add_option("--low-res", n.pipeline.sampling.low_res, "Side length of the sampled clip frames")->capture_default_str();
  s->add_option("--high-res", n.pipeline.sampling.high_res, "Side length of the scene center frame")->capture_default_str();
}

void add_model(CLI::App* s, Command& c) {
  auto& m = c.network.model;
  s->add_option_function<std::string>("--mode", [&m](const std::string& v) { m.mode = model::parse_mode(v); },
                                      "small freezes the temporal clip encoder, large trains everything")
      ->check(enum_check(model::parse_mode, "small|large"))
      ->default_str("small");
  s->add_option_function<std::string>("--fusion", [&m](const std::string& v) { m.fusion = model::parse_fusion(v); },
                                      "How the two stream embeddings are combined")
      ->check(enum_check(model::parse_fusion, "sum|gated|distill"))
      ->default_str("sum");
  s->add_option("--lambda", m.lambda, "Weight of the temporal stream in sum fusion")->capture_default_str();
  s->add_option_function<std::string>("--streams", [&m](const std::string& v) { m.streams = model::parse_streams(v); },
                                      "Streams to use (ablation)")
      ->check(enum_check(model::parse_streams, "both|spatial|temporal"))
      ->default_str("both");
  s->add_option_function<std::string>("--aggregator", [&m](const std::string& v) { m.aggregator = model::parse_aggregator(v); },
                                      "transformer, or avgpool for the average-pool baseline")
      ->check(enum_check(model::parse_aggregator, "transformer|avgpool"))
      ->default_str("transformer");
  s->add_option_function<std::string>("--head-activation",
                                      [&m](const std::string& v) { m.head_activation = model::parse_head_activation(v); },
                                      "Non-linearity inside the classifier")
      ->check(enum_check(model::parse_head_activation, "gated|gelu"))
      ->default_str("gated");
  s->add_flag("--positional,!--no-positional", m.positional, "Add positional embeddings to the scene tokens (on by default)");
  s->add_flag("--standardize-inputs,!--no-standardize-inputs", m.standardize_inputs,
             "Standardize feature dimensions with training-set statistics (on by default)");
  s->add_flag("--freeze-spatial", m.freeze_spatial_encoder, "Also freeze the spatial frame encoder");
  s->add_option("--d-model", m.d_model, "Transformer width")->capture_default_str();
  s->add_option("--heads", m.n_heads, "Attention heads")->capture_default_str();
  s->add_option("--layers", m.n_layers, "Encoder blocks per stream")->capture_default_str();
  s->add_option("--max-scenes", m.max_scenes, "Longest scene sequence accepted")->capture_default_str();
  s->add_option("--ffn-hidden", m.ffn_hidden, "Hidden width of the feed-forward sublayer")->capture_default_str();
  s->add_option("--q-hidden", m.q_hidden, "Hidden width of the shared projection head")->capture_default_str();
  s->add_option("--head-hidden", m.head_hidden, "Hidden width of the classifier")->capture_default_str();
  s->add_option("--temperature", m.distill_temperature, "Distillation temperature")->capture_default_str();
  s->add_option("--alpha", m.distill_alpha, "Weight of the distillation term")->capture_default_str();
}

void add_training(CLI::App* s, Command& c) {
  auto& t = c.train;
  s->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  s->add_option("--batch-size", t.batch_size, "Samples per optimizer step")->capture_default_str();
  s->add_option("--lr", t.adam.learning_rate, "Adam learning rate")->capture_default_str();
  s->add_option("--grad-clip", t.adam.grad_clip, "Global gradient norm limit (0 disables)")->capture_default_str();
  s->add_option("--eval-every", t.eval_every, "Evaluate every this many epochs")->capture_default_str();
  s->add_option("--threshold", t.threshold, "Score threshold for precision and recall")->capture_default_str();
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

// "--key=value" tokens for every entry of a flat JSON config.
std::vector<std::string> config_tokens(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError("config " + path.string() + " must be a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") throw FormatError("config files cannot name another config");
    std::string v;
    if (value.is_string()) v = value.get<std::string>();
    else if (value.is_array()) {
      for (const auto& item : value) v += (v.empty() ? "" : ",") + (item.is_string() ? item.get<std::string>() : item.dump());
    } else if (value.is_primitive() && !value.is_null()) v = value.dump();
    else throw FormatError("config key '" + key + "' must hold a string, number, boolean or list");
    tokens.push_back("--" + key + "=" + v);
  }
  return tokens;
}

std::optional<std::string> find_config(const std::vector<std::string>& args, std::size_t from) {
  std::optional<std::string> found;
  for (std::size_t i = from; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) found = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) found = args[i].substr(9);
  }
  return found;
}

// Post-parse consistency between the flag groups.
void finish(Command& c) {
  auto& n = c.network;
  n.encoder.spatial_dim = n.model.spatial_dim;
  n.encoder.temporal_dim = n.model.temporal_dim;
  n.seed = c.seed;
  c.train.seed = c.seed;
  c.train.workers = c.workers;
  c.gradcheck.seed = c.seed;
}

}  // namespace

std::unique_ptr<CLI::App> build_app(Command& c) {
  auto app = std::make_unique<CLI::App>("Scene-level two-stream transformer for long video classification", "stan");
  app->require_subcommand(1, 1);
  app->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app->get_formatter()->column_width(34);

  auto* datagen = app->add_subcommand("datagen", "Generate a labeled synthetic video dataset");
  add_config(datagen, c);
  add_io(datagen, c, "Output directory (videos/, train.jsonl, test.jsonl, labels.json)");
  datagen->add_option("--classes", c.synth.n_classes, "Number of classes (2-8)")->capture_default_str();
  datagen->add_option("--samples", c.samples, "Training videos")->capture_default_str();
  datagen->add_option("--test-samples", c.test_samples, "Test videos (0 skips the test split)")->capture_default_str();
  datagen->add_option("--resolution", c.synth.resolution, "Frame side length")->capture_default_str();
  datagen->add_option("--block-size", c.synth.block_size, "Side length of the moving block")->capture_default_str();
  datagen->add_option("--speed", c.synth.speed, "Block speed in pixels per frame")->capture_default_str();
  datagen->add_option("--min-scenes", c.synth.min_scenes, "Fewest scenes per video")->capture_default_str();
  datagen->add_option("--max-scenes", c.synth.max_scenes, "Most scenes per video")->capture_default_str();
  datagen->add_option("--min-scene-len", c.synth.min_scene_len, "Shortest scene in frames")->capture_default_str();
  datagen->add_option("--max-scene-len", c.synth.max_scene_len, "Longest scene in frames")->capture_default_str();
  datagen->add_option("--max-labels", c.synth.max_labels, "Most labels per video")->capture_default_str();
  datagen->add_flag("--appearance-confound", c.synth.appearance_confound, "Tint moving blocks by direction");

  auto* segment = app->add_subcommand("segment", "Detect scenes and report the sampled frame indices");
  add_config(segment, c);
  add_io(segment, c, "Directory for segments.jsonl (stdout when omitted)");
  segment->add_option("--data", c.data, "Manifest of videos");
  segment->add_option("--video", c.video, "A single frame directory or raw stream instead of a manifest");
  add_detector(segment, c);
  segment->add_option("--frames-per-scene", c.network.pipeline.sampling.frames_per_scene, "Frames sampled from each scene")
      ->capture_default_str();

  auto* extract = app->add_subcommand("extract", "Write per-scene encoder features to a feature store");
  add_config(extract, c);
  add_io(extract, c, "Store prefix; writes <prefix>.spatial.bin, <prefix>.temporal.bin and <prefix>.jsonl");
  extract->add_option("--data", c.data, "Manifest of videos")->required();
  extract->add_option("--ckpt", c.ckpt, "Take the encoders from this checkpoint instead of a fresh seeded network");
  add_encoder(extract, c);
  add_detector(extract, c);

  auto* train = app->add_subcommand("train", "Train a model");
  add_config(train, c);
  add_io(train, c, "Run directory (train_log.jsonl, best.ckpt, last.ckpt, run.json, metrics.json)");
  train->add_option("--data", c.data, "Training manifest")->required();
  train->add_option("--val", c.val, "Validation manifest (the training set is evaluated when omitted)");
  train->add_option("--labels", c.labels, "Label vocabulary (default: labels.json next to the manifest)");
  train->add_option("--features", c.features, "Feature store prefix; trains on stored features instead of frames");
  train->add_option("--subsample", c.subsample, "Train on this many seeded manifest entries (0 uses all)")->capture_default_str();
  train->add_option("--resume", c.resume, "Continue from a checkpoint written by an earlier run");
  add_model(train, c);
  add_encoder(train, c);
  add_detector(train, c);
  add_training(train, c);

  auto* eval = app->add_subcommand("eval", "Evaluate a checkpoint");
  add_config(eval, c);
  add_io(eval, c, "Directory for metrics.json and metrics.txt");
  eval->add_option("--ckpt", c.ckpt, "Checkpoint to evaluate")->required();
  eval->add_option("--data", c.data, "Manifest to evaluate on")->required();
  eval->add_option("--labels", c.labels, "Label vocabulary (default: labels.json next to the manifest)");
  eval->add_option("--features", c.features, "Feature store prefix for feature-input checkpoints");
  eval->add_option("--threshold", c.train.threshold, "Score threshold for precision and recall")->capture_default_str();
  eval->add_option("--shuffle-scenes", c.shuffle_scenes, "Shuffle the scene order of every video with this seed");

  auto* gradcheck = app->add_subcommand("gradcheck", "Compare autodiff gradients with finite differences");
  add_config(gradcheck, c);
  add_io(gradcheck, c, "Directory for gradcheck.json");
  gradcheck->add_option("--coords", c.gradcheck.coords_per_group, "Sampled coordinates per parameter group")->capture_default_str();
  gradcheck->add_option("--step", c.gradcheck.step, "Central difference step")->capture_default_str();
  gradcheck->add_option("--tolerance", c.gradcheck.tolerance, "Largest accepted relative error")->capture_default_str();
  gradcheck
      ->add_option_function<std::string>(
          "--fusion",
          [&c](const std::string& v) { c.network.model.fusion = model::parse_fusion(v); },
          "Fusion variant to check (sum or gated)")
      ->check(enum_check(
          [](std::string_view v) {
            if (model::parse_fusion(v) == model::Fusion::distill) {
              throw ContractError("fusion 'distill' has a stop-gradient teacher and cannot be checked");
            }
            return 0;
          },
          "sum|gated"))
      ->default_str("sum");

  auto* report = app->add_subcommand("report", "Tabulate metrics of one or more runs");
  add_config(report, c);
  report->add_option("--out", c.out, "Directory for summary.json");
  report->add_option("--runs", c.runs, "metrics.json files or run directories")->required()->expected(1, -1);
  return app;
}

Command parse_args(const std::vector<std::string>& args) {
  std::vector<std::string> expanded = args;
  std::size_t sub = 0;
  while (sub < args.size() && std::find(kSubcommands.begin(), kSubcommands.end(), args[sub]) == kSubcommands.end()) ++sub;
  if (sub == args.size() && !args.empty() && args.front().rfind("-", 0) != 0) {
    Command tmp;
    throw UsageError("unknown subcommand '" + args.front() + "'", build_app(tmp)->help());
  }
  std::optional<std::string> config;
  if (sub < args.size()) {
    config = find_config(args, sub + 1);
    if (config) {
      std::vector<std::string> tokens;
      try {
        tokens = config_tokens(*config);
      } catch (const std::exception& e) {
        Command tmp;
        auto app = build_app(tmp);
        throw UsageError(e.what(), app->get_subcommand(args[sub])->help());
      }
      expanded.insert(expanded.begin() + static_cast<std::ptrdiff_t>(sub + 1), tokens.begin(), tokens.end());
    }
  }

  Command c;
  auto app = build_app(c);
  std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
  try {
    app->parse(reversed);
  } catch (const CLI::CallForHelp&) {
    c.help = true;
    c.help_text = app->help();
    return c;
  } catch (const CLI::CallForAllHelp&) {
    c.help = true;
    c.help_text = app->help("", CLI::AppFormatMode::All);
    return c;
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    if (config) what += " (flags from " + *config + " are applied before the command line)";
    throw UsageError(what, app->help());
  }
  for (const auto* s : app->get_subcommands()) c.subcommand = s->get_name();
  finish(c);
  if (c.subcommand == "segment" && c.data.empty() == c.video.empty()) {
    throw UsageError("segment needs exactly one of --data or --video", app->help());
  }
  return c;
}

namespace {

void print_table_row(std::ostream& out, const train::GroupCheck& g) {
  out << std::left << std::setw(20) << g.group << std::right << std::setw(8) << g.coordinates << std::setw(14)
      << std::scientific << std::setprecision(3) << g.max_rel_error << "  " << g.worst << std::defaultfloat << "\n";
}

train::LabelVocabulary vocabulary_for(const Command& c) {
  return train::LabelVocabulary::read(c.labels.empty() ? train::default_vocabulary_path(c.data) : fs::path(c.labels));
}

void report_skipped(const train::Dataset& d, std::ostream& err) {
  for (const auto& s : d.skipped) err << "warning: skipped " << s << "\n";
}

void write_report(const fs::path& dir, const metrics::MetricsReport& r, const std::string& title, std::ostream& out) {
  const std::string table = metrics::render_table(r, title);
  out << table;
  if (dir.empty()) return;
  write_text(dir / "metrics.json", metrics::to_json(r).dump(2) + "\n");
  write_text(dir / "metrics.txt", table);
}

int run_datagen(const Command& c, std::ostream& out) {
  if (c.out.empty()) throw ContractError("datagen needs --out");
  const auto names = datagen::class_names(c.synth);
  const fs::path train = datagen::generate_dataset(c.synth, c.samples, c.seed, c.out, "train", c.workers);
  out << "wrote " << c.samples << " videos over " << names.size() << " classes to " << train.string() << "\n";
  if (c.test_samples > 0) {
    const fs::path test = datagen::generate_dataset(c.synth, c.test_samples, c.seed, c.out, "test", c.workers);
    out << "wrote " << c.test_samples << " videos to " << test.string() << "\n";
  }
  return 0;
}

int run_segment(const Command& c, std::ostream& out, std::ostream& err) {
  std::vector<train::ManifestEntry> entries;
  if (!c.video.empty()) {
    const fs::path p(c.video);
    entries.push_back({p.filename().string(), fs::is_directory(p) ? train::SourceKind::frames_dir : train::SourceKind::raw, p, {}});
  } else {
    const auto m = train::read_manifest(c.data);
    for (const auto& b : m.bad_lines) err << "warning: skipped " << b << "\n";
    entries = m.entries;
  }
  c.network.pipeline.detector.validate();
  c.network.pipeline.sampling.validate();
  std::ostringstream lines;
  std::size_t failed = 0;
  for (const auto& e : entries) {
    try {
      const auto video = train::read_entry_video(e);
      const auto bounds = scene::detect_scenes(video, c.network.pipeline.detector);
      json scenes = json::array();
      for (std::size_t k = 0; k < bounds.size(); ++k) {
        const auto offsets = scene::uniform_sample_offsets(bounds[k].end - bounds[k].start, c.network.pipeline.sampling.frames_per_scene);
        json clip = json::array();
        for (auto o : offsets) clip.push_back(bounds[k].start + o);
        scenes.push_back({{"index", k},
                          {"start", bounds[k].start},
                          {"end", bounds[k].end},
                          {"center", bounds[k].start + (bounds[k].end - bounds[k].start) / 2},
                          {"clip", clip}});
      }
      lines << json{{"video_id", e.video_id}, {"frames", video.frames.size()}, {"scenes", scenes}}.dump() << "\n";
      if (!c.out.empty()) out << e.video_id << ": " << video.frames.size() << " frames, " << bounds.size() << " scenes\n";
    } catch (const std::exception& ex) {
      ++failed;
      err << "warning: skipped " << e.video_id << ": " << ex.what() << "\n";
    }
  }
  if (c.out.empty()) out << lines.str();
  else write_text(fs::path(c.out) / "segments.jsonl", lines.str());
  return failed == entries.size() && !entries.empty() ? 1 : 0;
}

int run_extract(const Command& c, std::ostream& out, std::ostream& err) {
  if (c.out.empty()) throw ContractError("extract needs --out");
  std::unique_ptr<model::Network> net;
  if (!c.ckpt.empty()) {
    net = train::network_from_checkpoint(train::read_checkpoint(c.ckpt));
  } else {
    model::NetworkConfig cfg = c.network;
    cfg.input = model::InputKind::frames;
    cfg.model.n_classes = std::max<std::size_t>(cfg.model.n_classes, 1);
    net = std::make_unique<model::Network>(cfg);
  }
  if (!net->has_encoders()) throw ContractError("checkpoint " + c.ckpt + " has no encoders (feature-input model)");
  const auto manifest = train::read_manifest(c.data);
  for (const auto& b : manifest.bad_lines) err << "warning: skipped " << b << "\n";
  const auto& entries = manifest.entries;
  const auto& cfg = net->config();

  struct Result {
    num::Tensor spatial, temporal;
    std::string error;
  };
  std::vector<Result> results(entries.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      try {
        model::SampleInput in;
        in.scenes = scene::segment_video(train::read_entry_video(entries[i]), cfg.pipeline);
        if (cfg.model.uses_spatial()) results[i].spatial = net->spatial_features(in);
        if (cfg.model.uses_temporal()) results[i].temporal = net->temporal_features(in);
      } catch (const std::exception& ex) {
        results[i].error = ex.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(c.workers, entries.size()); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  enc::FeatureBank bank;
  std::vector<train::ManifestEntry> written;
  auto store = [&](const std::string& id, const num::Tensor& t, enc::Stream s) {
    if (t.size() == 0) return;
    for (std::size_t k = 0; k < t.dim(0); ++k) {
      std::vector<float> row(t.dim(1));
      for (std::size_t j = 0; j < t.dim(1); ++j) row[j] = static_cast<float>(t.at(k, j));
      bank.store(id, k, s, row);
    }
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!results[i].error.empty()) {
      err << "warning: skipped " << entries[i].video_id << ": " << results[i].error << "\n";
      continue;
    }
    store(entries[i].video_id, results[i].spatial, enc::Stream::spatial);
    store(entries[i].video_id, results[i].temporal, enc::Stream::temporal);
    written.push_back({entries[i].video_id, train::SourceKind::features, fs::absolute(c.out), entries[i].labels});
  }
  if (written.empty()) throw FormatError("no video could be encoded");
  const fs::path prefix(c.out);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  if (cfg.model.uses_spatial()) bank.spatial.save(enc::FeatureBank::path_for(prefix, enc::Stream::spatial));
  if (cfg.model.uses_temporal()) bank.temporal.save(enc::FeatureBank::path_for(prefix, enc::Stream::temporal));
  fs::path manifest_out = prefix;
  manifest_out += ".jsonl";
  train::write_manifest(manifest_out, written);
  const fs::path vocab = train::default_vocabulary_path(c.data);
  if (fs::exists(vocab) && fs::absolute(vocab) != fs::absolute(train::default_vocabulary_path(manifest_out))) {
    fs::copy_file(vocab, train::default_vocabulary_path(manifest_out), fs::copy_options::overwrite_existing);
  }
  out << "encoded " << written.size() << " of " << entries.size() << " videos (" << bank.spatial.size()
      << " spatial, " << bank.temporal.size() << " temporal records) into " << prefix.string() << "\n";
  return 0;
}

int run_train(const Command& c, std::ostream& out, std::ostream& err) {
  if (c.out.empty()) throw ContractError("train needs --out");
  model::NetworkConfig cfg = c.network;
  const auto vocab = vocabulary_for(c);
  cfg.model.n_classes = vocab.size();

  const train::Manifest full = train::read_manifest(c.data);
  const train::Manifest manifest = train::subsample(full, c.subsample, c.seed);
  if (c.subsample > 0) {
    out << "subsample: training on " << manifest.entries.size() << " of " << full.entries.size() << " entries\n";
  }

  train::LoadOptions load;
  load.workers = c.workers;
  std::optional<fs::path> feature_prefix;
  if (!c.features.empty()) feature_prefix = fs::path(c.features);
  else if (!manifest.entries.empty() && std::all_of(manifest.entries.begin(), manifest.entries.end(), [](const auto& e) {
             return e.kind == train::SourceKind::features;
           })) {
    feature_prefix = manifest.entries.front().path;
  }
  if (feature_prefix) {
    cfg.input = model::InputKind::features;
    if (cfg.model.uses_spatial()) cfg.model.spatial_dim = enc::FeatureStore::read(enc::FeatureBank::path_for(*feature_prefix, enc::Stream::spatial)).dim();
    if (cfg.model.uses_temporal()) cfg.model.temporal_dim = enc::FeatureStore::read(enc::FeatureBank::path_for(*feature_prefix, enc::Stream::temporal)).dim();
    cfg.encoder.spatial_dim = cfg.model.spatial_dim;
    cfg.encoder.temporal_dim = cfg.model.temporal_dim;
    if (!c.features.empty()) load.feature_prefix = feature_prefix;
  }

  train::Dataset train_set = train::load_dataset(manifest, vocab, cfg, load);
  report_skipped(train_set, err);
  train::Dataset val_set;
  if (!c.val.empty()) {
    val_set = train::load_dataset(train::read_manifest(c.val), vocab, cfg, load);
    report_skipped(val_set, err);
  }

  model::Network net(cfg);
  train::FitOptions fo;
  fo.out_dir = c.out;
  if (!c.resume.empty()) fo.resume = fs::path(c.resume);
  fo.on_log = [&out](const json& rec) {
    out << "epoch " << rec.at("epoch") << "  step " << rec.at("step") << "  loss " << std::fixed << std::setprecision(4)
        << rec.at("loss").get<double>() << "  mAP " << rec.at("mAP").get<double>() << "  F1_w "
        << rec.at("F1_w").get<double>() << std::defaultfloat << "\n";
  };
  const train::FitResult r = train::fit(net, train_set, val_set, c.train, fo);

  json run{{"network", model::to_json(cfg)},
           {"train", train::to_json(c.train)},
           {"data", {{"manifest", c.data}, {"entries", full.entries.size()}, {"subsample", c.subsample},
                     {"used", manifest.entries.size()}, {"loaded", train_set.size()}, {"skipped", train_set.skipped}}},
           {"best_epoch", r.best_epoch},
           {"best_mAP", r.best_map}};
  if (!c.val.empty()) run["data"]["val"] = c.val;
  write_text(fs::path(c.out) / "run.json", run.dump(2) + "\n");
  if (r.final_report) write_report(c.out, *r.final_report, c.val.empty() ? "final (train set)" : "final (validation set)", out);
  out << "best mAP " << r.best_map << " at epoch " << r.best_epoch << "; checkpoints in " << c.out << "\n";
  return 0;
}

int run_eval(const Command& c, std::ostream& out, std::ostream& err) {
  const train::Checkpoint ck = train::read_checkpoint(c.ckpt);
  auto net = train::network_from_checkpoint(ck);
  const auto vocab = vocabulary_for(c);
  if (vocab.size() != ck.config.model.n_classes) {
    throw FormatError("vocabulary has " + std::to_string(vocab.size()) + " classes, checkpoint expects " +
                      std::to_string(ck.config.model.n_classes));
  }
  train::LoadOptions load;
  load.workers = c.workers;
  if (!c.features.empty()) {
    if (ck.config.input != model::InputKind::features) throw ContractError("--features needs a feature-input checkpoint");
    load.feature_prefix = fs::path(c.features);
  }
  train::Dataset ds = train::load_dataset(train::read_manifest(c.data), vocab, ck.config, load);
  report_skipped(ds, err);
  const auto report = train::evaluate(*net, ds, c.workers, c.train.threshold, c.shuffle_scenes);
  write_report(c.out, report, fs::path(c.data).filename().string(), out);
  return 0;
}

int run_gradcheck(const Command& c, std::ostream& out) {
  const auto report = train::run_model_gradcheck(c.seed, c.network.model.fusion, c.gradcheck);
  out << std::left << std::setw(20) << "group" << std::right << std::setw(8) << "coords" << std::setw(14) << "max rel err"
      << "  worst\n";
  json groups = json::array();
  for (const auto& g : report.groups) {
    print_table_row(out, g);
    groups.push_back({{"group", g.group}, {"coordinates", g.coordinates}, {"max_rel_error", g.max_rel_error},
                      {"max_abs_error", g.max_abs_error}, {"worst", g.worst}});
  }
  out << "max relative error " << std::scientific << std::setprecision(3) << report.max_rel_error << std::defaultfloat
      << " (tolerance " << c.gradcheck.tolerance << "): " << (report.passed ? "PASS" : "FAIL") << "\n";
  if (!c.out.empty()) {
    write_text(fs::path(c.out) / "gradcheck.json",
               json{{"seed", c.seed}, {"fusion", model::to_string(c.network.model.fusion)}, {"groups", groups},
                    {"max_rel_error", report.max_rel_error}, {"passed", report.passed}}
                       .dump(2) + "\n");
  }
  return report.passed ? 0 : 1;
}

int run_report(const Command& c, std::ostream& out) {
  std::vector<metrics::MetricsReport> reports;
  for (const auto& r : c.runs) {
    fs::path p(r);
    if (fs::is_directory(p)) p /= "metrics.json";
    try {
      reports.push_back(metrics::report_from_json(json::parse(read_text(p))));
    } catch (const json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
  }
  if (reports.size() == 1) {
    out << metrics::render_table(reports.front(), c.runs.front());
    return 0;
  }
  const auto summary = metrics::summarize_runs(reports);
  out << metrics::render_summary({std::to_string(reports.size()) + " runs"}, {summary});
  if (!c.out.empty()) write_text(fs::path(c.out) / "summary.json", metrics::to_json(summary).dump(2) + "\n");
  return 0;
}

}  // namespace

int run(const Command& c, std::ostream& out, std::ostream& err) {
  if (c.help) {
    out << c.help_text;
    return 0;
  }
  try {
    if (c.subcommand == "datagen") return run_datagen(c, out);
    if (c.subcommand == "segment") return run_segment(c, out, err);
    if (c.subcommand == "extract") return run_extract(c, out, err);
    if (c.subcommand == "train") return run_train(c, out, err);
    if (c.subcommand == "eval") return run_eval(c, out, err);
    if (c.subcommand == "gradcheck") return run_gradcheck(c, out);
    if (c.subcommand == "report") return run_report(c, out);
    err << "error: unknown subcommand '" << c.subcommand << "'\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Command cmd;
  try {
    cmd = parse_args(args);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << e.usage();
    return 2;
  }
  return run(cmd, out, err);
}

}  // namespace stan::cli
