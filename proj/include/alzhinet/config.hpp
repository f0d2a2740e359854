#pragma once

#include "alzhinet/data.hpp"
#include "alzhinet/training.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace alzhinet::cli {

struct DataConfig {
  std::string dir;  // class-per-directory tree; exclusive with `synthetic`
  std::optional<data::SyntheticSpec> synthetic;
  int resize_h = 32;
  int resize_w = 32;
  double train_fraction = 0.7;
  std::map<std::string, std::size_t> oversample;  // class name -> target train count
};

struct ModelConfig {
  int num_classes = 0;  // 0: derive from the data
  double width_multiplier = 0.125;
  std::vector<int> blocks_per_stage = {2, 2, 2, 2};
};

struct SweepConfig {
  std::vector<std::string> families;  // empty: all six
  std::string head = "2d";
  std::map<std::string, std::vector<double>> level_overrides;
};

/// One JSON document drives every subcommand. Unknown keys anywhere are
/// rejected; the fully resolved form is echoed into the output directory
/// before any work happens.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  bool save_hybrid = false;
  SweepConfig sweep;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string resolved_json(const RunConfig& cfg);

// Sub-seeds shared by the subcommands so that train/eval/perturb agree on
// derived artifacts (splits, init) for one config seed.
std::uint64_t split_seed(const RunConfig& cfg);
std::uint64_t init_seed(const RunConfig& cfg);
std::uint64_t sweep_seed(const RunConfig& cfg);

}  // namespace alzhinet::cli
