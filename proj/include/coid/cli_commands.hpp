#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "coid/dataset.hpp"
#include "coid/evaluate.hpp"
#include "coid/model.hpp"
#include "coid/trainer.hpp"

namespace coid {

struct SweepConfig {
  std::string kind = "theta";  // theta | depth | gps
  double theta_max = 0.5;
  int steps = 50;
  std::vector<double> depth_levels{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> gps_levels{0.0, 0.6, 1.2, 1.8, 2.4, 3.0};
};

// Everything a command needs, after merging defaults, the --config file and
// flag overrides. Written to <out>/config.json before any work starts;
// `coid <command> --config <out>/config.json` reruns the same experiment.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::string out;
  std::string data;        // dataset directory (train, eval, sweep, baseline)
  std::string checkpoint;  // eval, sweep
  std::string resume;      // train
  std::string split = "test";
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  SweepConfig sweep;
  BaselineConfig baseline;
  bool tune_baselines = true;

  nlohmann::json to_json() const;
};

/// Missing keys keep defaults, unknown keys raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);

inline constexpr const char* kSnapshotName = "config.json";
inline constexpr const char* kBestCheckpointName = "checkpoint.json";
inline constexpr const char* kLastCheckpointName = "last.json";

/// Splits `total` over train/val/test in proportion to the configured counts.
void scale_split_sizes(DatasetConfig& cfg, int total);

void cmd_generate(const RunConfig& cfg, int workers);
void cmd_train(const RunConfig& cfg, int workers);
void cmd_eval(const RunConfig& cfg, int workers);
void cmd_sweep(const RunConfig& cfg, int workers);
void cmd_baseline(const RunConfig& cfg, int workers);

/// Parses argv-style arguments (args[0] is the program name), runs the
/// command and maps failures to exit codes 0/1/2/3.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coid
