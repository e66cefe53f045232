#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace topseg::cli {

struct SynthResult {
  Corpus corpus;
  CorpusStats stats;
  std::vector<fs::path> written;
};

struct TrainOutcome {
  double dev_pk = 0.0;  // x100 at the tuned threshold
  double tau = 0.5;
  int best_epoch = 0;
  std::string checkpoint_sha256;
  std::size_t docs_without_edges = 0;
};

struct TransferResult {
  std::vector<EvalReport> reports;
  std::string checkpoint_sha256;
};

struct BenchResult {
  std::vector<BenchReport> reports;
  std::optional<Overhead> overhead;
};

// Each command prints its primary output to `out` and warnings or progress
// to `err`. Files named in the config are written as a side effect.
SynthResult cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err);
TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);
EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err);
TransferResult cmd_transfer(const RunConfig& cfg, std::ostream& out, std::ostream& err);
BenchResult cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Full command-line entry point. Exit codes: 0 success, 1 invalid input or
// arguments, 2 runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

// Reference labels from a JSONL file of {"id", "labels"} objects.
std::map<std::string, std::vector<int>> load_hypotheses(const fs::path& path);

}  // namespace topseg::cli
