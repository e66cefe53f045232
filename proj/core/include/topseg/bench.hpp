#pragma once

#include <string>
#include <vector>

#include "topseg/segmenter.hpp"

namespace topseg {

struct BenchReport {
  std::string variant;
  std::size_t param_count = 0;
  double t_speed = 0.0;  // batches per second
  double i_speed = 0.0;  // documents per second
  std::string hardware;
  std::string config;    // JSON echo of the model config
};

std::size_t count_params(const SegmenterModel& model);

// Analytic count from config shapes alone.
std::size_t expected_param_count(const ModelConfig& cfg);

enum class SpeedMode { train, infer };

struct SpeedOptions {
  int warmup = 1;
  int reps = 3;
  int batch_size = 8;
};

struct SpeedSample {
  double median = 0.0;
  std::vector<double> per_rep;
};

// Median over reps of a full pass over docs. Training mode runs
// forward+backward+Adam step per batch on a private copy of the model and
// reports batches/sec; inference reports docs/sec and includes
// infer_boundaries.
SpeedSample measure_speed(const SegmenterModel& model,
                          const std::vector<PreparedDoc>& docs, SpeedMode mode,
                          const SpeedOptions& opts = {});

struct Overhead {
  double params_pct = 0.0;
  double t_speed_pct = 0.0;
  double i_speed_pct = 0.0;
};

// Parameter growth and train/infer slowdowns of variant relative to basic,
// as percentages.
Overhead relative_overhead(const BenchReport& basic, const BenchReport& variant);

std::string hardware_note();
std::string to_json(const BenchReport& report, int indent = -1);
BenchReport bench_report_from_json(const std::string& text);
// Table with columns "# Params", "T-Speed", "I-Speed".
std::string format_bench_table(const std::vector<BenchReport>& reports);

}  // namespace topseg
