#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stan/datagen/synthetic.hpp"
#include "stan/model/network.hpp"
#include "stan/training/gradcheck.hpp"
#include "stan/training/trainer.hpp"

namespace CLI {
class App;
}

namespace stan::cli {

inline const std::vector<std::string> kSubcommands{"datagen", "segment", "extract", "train", "eval", "gradcheck", "report"};

// Bad flags, values or subcommands. `usage` is the help text of the
// offending (sub)command.
class UsageError : public std::runtime_error {
 public:
  UsageError(const std::string& what, std::string usage) : std::runtime_error(what), usage_(std::move(usage)) {}
  const std::string& usage() const { return usage_; }

 private:
  std::string usage_;
};

struct Command {
  std::string subcommand;
  bool help = false;  // --help was given; help_text holds the output
  std::string help_text;

  std::string config;  // flat JSON file of flag values, applied before the flags
  std::string data;
  std::string val;
  std::string labels;
  std::string out;
  std::string ckpt;
  std::string features;
  std::string video;
  std::vector<std::string> runs;
  std::string resume;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t subsample = 0;
  std::optional<std::uint64_t> shuffle_scenes;

  model::NetworkConfig network;
  train::TrainConfig train;

  datagen::SyntheticSpec synth;
  std::size_t samples = 64;
  std::size_t test_samples = 0;

  train::GradcheckOptions gradcheck;
};

// The parser for all subcommands, writing into `cmd`.
std::unique_ptr<CLI::App> build_app(Command& cmd);

// args excludes the program name. Throws UsageError.
Command parse_args(const std::vector<std::string>& args);

// 0 on success, 1 on a runtime failure (diagnostic on err).
int run(const Command& cmd, std::ostream& out, std::ostream& err);

// parse_args + run; usage errors print the message and usage on err and
// return 2.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stan::cli
