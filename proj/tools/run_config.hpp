#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topseg/bench.hpp"
#include "topseg/corpus.hpp"
#include "topseg/metrics.hpp"
#include "topseg/segmenter.hpp"

namespace topseg::cli {

namespace fs = std::filesystem;

enum class BenchVariants { basic, discourse, both };

// Everything a command needs, resolved from defaults, an optional JSON config
// file and command-line flags (in that order of precedence).
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;

  SynthConfig synth;
  bool write_split = false;
  SplitRatios split;
  ModelConfig model;
  TrainConfig train;
  double flip_rate = 0.0;
  KPolicy k_policy = KPolicy::per_document;
  SpeedOptions bench;
  BenchVariants bench_variants = BenchVariants::both;

  std::optional<fs::path> out;
  std::optional<fs::path> train_path;
  std::optional<fs::path> dev_path;
  std::optional<fs::path> data_path;
  std::optional<fs::path> hyp_path;
  std::optional<fs::path> model_path;
  std::optional<fs::path> vectors_path;
  std::vector<fs::path> targets;
};

// Keys accepted by --set and config files, in echo order.
const std::vector<std::string>& setting_keys();

// Throws ValidationError for unknown keys or malformed values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Flat JSON object of key -> value; arrays become comma lists. A "command"
// entry must match cfg.command when present.
void apply_config_file(RunConfig& cfg, const fs::path& path);

// Every setting key with its resolved value, plus "command". Feeding this
// back through apply_config_file reproduces the run.
nlohmann::ordered_json run_config_json(const RunConfig& cfg);

}  // namespace topseg::cli
