#include "commands.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "topseg/config_json.hpp"
#include "topseg/error.hpp"

namespace topseg::cli {
namespace {

using nlohmann::ordered_json;

// Independent noise streams for each corpus role, all derived from the root
// seed.
constexpr std::uint64_t kTrainStream = 0x7261696eULL;
constexpr std::uint64_t kDevStream = 0x646576ULL;
constexpr std::uint64_t kEvalStream = 0x6576616cULL;

GraphOptions graph_options(const RunConfig& cfg, std::uint64_t stream) {
  return {cfg.flip_rate, cfg.seed ^ (stream * 0x9e3779b97f4a7c15ULL)};
}

const fs::path& require(const std::optional<fs::path>& p, const std::string& flag,
                        const std::string& command) {
  if (!p) throw ValidationError(command + " needs " + flag);
  return *p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".run.json"); }

std::size_t warn_missing_edges(const RunConfig& cfg, const Corpus& corpus,
                               const std::string& role, std::ostream& err) {
  if (cfg.model.variant != Variant::discourse) return 0;
  std::size_t missing = 0;
  for (const auto& d : corpus.documents) missing += d.has_edges ? 0 : 1;
  if (missing > 0) {
    err << "warning: " << missing << " of " << corpus.size() << " " << role
        << " documents have no discourse edges; using self-loop graphs\n";
  }
  return missing;
}

std::optional<ExternalVectors> external_vectors(const RunConfig& cfg,
                                                const ModelConfig& model_cfg) {
  if (model_cfg.encoder.sentence_encoder != SentenceEncoderKind::external) return std::nullopt;
  const fs::path& p = require(cfg.vectors_path, "--vectors in external encoder mode", cfg.command);
  return load_external_vectors(p, model_cfg.encoder.external_dim);
}

const ExternalVectors* ptr(const std::optional<ExternalVectors>& v) {
  return v ? &*v : nullptr;
}

Corpus load_named(const fs::path& path) {
  Corpus c = load_jsonl(path);
  c.name = path.stem().string();
  return c;
}

ordered_json report_json(const EvalReport& report, const RunConfig& cfg) {
  ordered_json j = ordered_json::parse(to_json(report));
  j["seed"] = cfg.seed;
  return j;
}

std::string format_stats(const CorpusStats& s) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "# of doc" << std::setw(14) << "# sent/seg"
      << "# seg/doc" << '\n'
      << std::setw(12) << s.num_docs << std::fixed << std::setprecision(1) << std::setw(14)
      << s.sentences_per_segment << s.segments_per_doc << '\n';
  return out.str();
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return sha256_hex(s.str());
}

std::map<std::string, std::vector<int>> load_hypotheses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::vector<int>> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("id").get<std::string>();
      if (!out.emplace(id, j.at("labels").get<std::vector<int>>()).second) {
        throw ValidationError(path.string() + ": duplicate hypothesis for '" + id + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(line_number) + ": " +
                       e.what());
    }
  }
  return out;
}

SynthResult cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const fs::path& path = require(cfg.out, "--out", "synth");
  SynthConfig sc = cfg.synth;
  sc.seed = cfg.seed;
  SynthResult result;
  result.corpus = generate_synthetic(sc);
  result.stats = corpus_stats(result.corpus);

  if (cfg.write_split) {
    const CorpusSplit parts = split(result.corpus, cfg.split, cfg.seed);
    const fs::path stem = path.parent_path() / path.stem();
    const std::pair<const char*, const Corpus*> outputs[] = {
        {".train.jsonl", &parts.train}, {".dev.jsonl", &parts.dev}, {".test.jsonl", &parts.test}};
    for (const auto& [suffix, corpus] : outputs) {
      const fs::path p(stem.string() + suffix);
      save_jsonl(*corpus, p);
      result.written.push_back(p);
    }
  } else {
    save_jsonl(result.corpus, path);
    result.written.push_back(path);
  }
  ordered_json echo = run_config_json(cfg);
  write_text(sidecar(path), echo.dump(2) + "\n");

  out << "seed " << cfg.seed << '\n' << format_stats(result.stats);
  for (const auto& p : result.written) out << "wrote " << p.string() << '\n';
  return result;
}

TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Corpus train_corpus = load_named(require(cfg.train_path, "--train", "train"));
  const Corpus dev_corpus = load_named(require(cfg.dev_path, "--dev", "train"));
  const fs::path& ckpt = require(cfg.out, "--out", "train");
  validate_train_config(cfg.train);

  TrainOutcome outcome;
  outcome.docs_without_edges = warn_missing_edges(cfg, train_corpus, "train", err) +
                               warn_missing_edges(cfg, dev_corpus, "dev", err);
  const auto vectors = external_vectors(cfg, cfg.model);

  Vocabulary vocab = cfg.model.encoder.sentence_encoder == SentenceEncoderKind::trainable
                         ? Vocabulary::build(train_corpus)
                         : Vocabulary();
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  SegmenterModel model(cfg.model, std::move(vocab), cfg.seed);
  const auto train_docs =
      model.prepare(train_corpus, graph_options(cfg, kTrainStream), ptr(vectors));
  const auto dev_docs = model.prepare(dev_corpus, graph_options(cfg, kDevStream), ptr(vectors));

  out << "seed " << cfg.seed << '\n';
  TrainResult result = train_prepared(std::move(model), train_docs, dev_docs, tc,
                                      [&](const EpochRecord& r) {
                                        out << "epoch " << r.epoch << " train_loss "
                                            << std::fixed << std::setprecision(4)
                                            << r.train_loss << " dev_pk@0.5 "
                                            << std::setprecision(1)
                                            << report_scale(r.dev_pk) << '\n';
                                        out.unsetf(std::ios::floatfield);
                                      });
  outcome.best_epoch = result.best_epoch;
  outcome.tau = tune_threshold(result.model, dev_docs);
  outcome.dev_pk = report_scale(mean_pk(result.model, dev_docs, outcome.tau));

  save_checkpoint(result.model, ckpt);
  outcome.checkpoint_sha256 = sha256_file(ckpt);

  ordered_json echo = run_config_json(cfg);
  echo["result"] = {{"seed", cfg.seed},
                    {"best_epoch", outcome.best_epoch},
                    {"tau", outcome.tau},
                    {"dev_pk", outcome.dev_pk},
                    {"checkpoint_sha256", outcome.checkpoint_sha256}};
  write_text(sidecar(ckpt), echo.dump(2) + "\n");

  out << "best_epoch " << outcome.best_epoch << " tau " << outcome.tau << " dev_pk "
      << std::fixed << std::setprecision(1) << outcome.dev_pk << '\n';
  out.unsetf(std::ios::floatfield);
  out << "checkpoint " << ckpt.string() << " sha256 " << outcome.checkpoint_sha256 << '\n';
  return outcome;
}

EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Corpus data = load_named(require(cfg.data_path, "--data", "eval"));
  EvalReport report;
  if (cfg.hyp_path) {
    const auto hyps = load_hypotheses(*cfg.hyp_path);
    std::vector<std::string> ids;
    std::vector<Segmentation> refs;
    std::vector<Segmentation> hyp_segs;
    for (const auto& doc : data.documents) {
      const auto it = hyps.find(doc.id);
      if (it == hyps.end()) throw ValidationError("no hypothesis for document '" + doc.id + "'");
      if (it->second.size() != doc.size()) {
        throw ValidationError("hypothesis for '" + doc.id + "' has " +
                              std::to_string(it->second.size()) + " labels, expected " +
                              std::to_string(doc.size()));
      }
      ids.push_back(doc.id);
      refs.push_back(Segmentation::from_labels(doc.labels));
      hyp_segs.push_back(Segmentation::from_labels(it->second));
    }
    report = score_segmentations(data.name, ids, refs, hyp_segs, cfg.k_policy);
  } else {
    const SegmenterModel model = load_checkpoint(require(cfg.model_path, "--model or --hyp", "eval"));
    if (!model.tau()) throw ValidationError("checkpoint has no tuned threshold");
    RunConfig effective = cfg;
    effective.model = model.config();
    warn_missing_edges(effective, data, "eval", err);
    const auto vectors = external_vectors(cfg, model.config());
    const auto docs = model.prepare(data, graph_options(cfg, kEvalStream), ptr(vectors));
    report = evaluate(model, data.name, docs, cfg.k_policy);
  }
  for (const auto& id : report.skipped_docs) {
    err << "warning: skipped '" << id << "' (too short for the Pk window)\n";
  }
  const ordered_json j = report_json(report, cfg);
  if (cfg.out) {
    write_text(*cfg.out, j.dump(2) + "\n");
    write_text(sidecar(*cfg.out), run_config_json(cfg).dump(2) + "\n");
  }
  out << j.dump() << '\n';
  return report;
}

TransferResult cmd_transfer(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path& ckpt = require(cfg.model_path, "--model", "transfer");
  if (cfg.targets.empty()) throw ValidationError("transfer needs at least one --target");
  TransferResult result;
  result.checkpoint_sha256 = sha256_file(ckpt);
  const SegmenterModel model = load_checkpoint(ckpt);
  if (!model.tau()) throw ValidationError("checkpoint has no tuned threshold");
  RunConfig effective = cfg;
  effective.model = model.config();
  const auto vectors = external_vectors(cfg, model.config());

  ordered_json all = ordered_json::array();
  for (const auto& target : cfg.targets) {
    const Corpus data = load_named(target);
    warn_missing_edges(effective, data, data.name, err);
    const auto docs = model.prepare(data, graph_options(cfg, kEvalStream), ptr(vectors));
    result.reports.push_back(evaluate(model, data.name, docs, cfg.k_policy));
    ordered_json j = report_json(result.reports.back(), cfg);
    j["checkpoint_sha256"] = result.checkpoint_sha256;
    out << j.dump() << '\n';
    all.push_back(std::move(j));
  }
  if (sha256_file(ckpt) != result.checkpoint_sha256) {
    throw Error("checkpoint changed during transfer evaluation");
  }
  if (cfg.out) {
    write_text(*cfg.out, all.dump(2) + "\n");
    write_text(sidecar(*cfg.out), run_config_json(cfg).dump(2) + "\n");
  }
  return result;
}

BenchResult cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Corpus data;
  if (cfg.data_path) {
    data = load_named(*cfg.data_path);
  } else {
    SynthConfig sc = cfg.synth;
    sc.seed = cfg.seed;
    data = generate_synthetic(sc);
  }
  if (data.empty()) throw ValidationError("bench needs a nonempty corpus");

  std::vector<Variant> variants;
  if (cfg.bench_variants != BenchVariants::discourse) variants.push_back(Variant::basic);
  if (cfg.bench_variants != BenchVariants::basic) variants.push_back(Variant::discourse);

  BenchResult result;
  for (Variant v : variants) {
    ModelConfig mc = cfg.model;
    mc.variant = v;
    RunConfig effective = cfg;
    effective.model = mc;
    warn_missing_edges(effective, data, "bench", err);
    const auto vectors = external_vectors(cfg, mc);
    Vocabulary vocab = mc.encoder.sentence_encoder == SentenceEncoderKind::trainable
                           ? Vocabulary::build(data)
                           : Vocabulary();
    const SegmenterModel model(mc, std::move(vocab), cfg.seed);
    const auto docs = model.prepare(data, graph_options(cfg, kEvalStream), ptr(vectors));
    BenchReport r;
    r.variant = to_string(v);
    r.param_count = count_params(model);
    r.t_speed = measure_speed(model, docs, SpeedMode::train, cfg.bench).median;
    r.i_speed = measure_speed(model, docs, SpeedMode::infer, cfg.bench).median;
    r.hardware = hardware_note();
    r.config = model_config_to_json(model.config());
    result.reports.push_back(std::move(r));
  }
  if (result.reports.size() == 2) {
    result.overhead = relative_overhead(result.reports[0], result.reports[1]);
  }

  ordered_json j;
  j["seed"] = cfg.seed;
  j["reports"] = ordered_json::array();
  for (const auto& r : result.reports) j["reports"].push_back(ordered_json::parse(to_json(r)));
  if (result.overhead) {
    j["overhead"] = {{"params_pct", result.overhead->params_pct},
                     {"t_speed_pct", result.overhead->t_speed_pct},
                     {"i_speed_pct", result.overhead->i_speed_pct}};
  }
  j["run_config"] = run_config_json(cfg);
  if (cfg.out) write_text(*cfg.out, j.dump(2) + "\n");

  out << "seed " << cfg.seed << '\n' << format_bench_table(result.reports);
  if (result.overhead) {
    out << std::fixed << std::setprecision(1) << "discourse vs basic: params +"
        << result.overhead->params_pct << "%, training "
        << result.overhead->t_speed_pct << "% slower, inference "
        << result.overhead->i_speed_pct << "% slower\n";
    out.unsetf(std::ios::floatfield);
  }
  return result;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discourse-aware neural topic segmentation"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_path;
  std::string variant;
  std::vector<std::string> sets;
  std::string train_path, dev_path, data_path, hyp_path, model_path, vectors_path;
  std::vector<std::string> targets;
  std::string bench_variants;
  bool write_split = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Root seed for all randomness");
    sub->add_option("--config", config_path, "JSON config file (flat key -> value)");
    sub->add_option("--out", out_path, "Output path");
    sub->add_option("--variant", variant, "basic or discourse")
        ->check(CLI::IsMember({"basic", "discourse"}));
    sub->add_option("--set", sets, "Override a setting: key=value")->take_all();
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  common(synth);
  synth->add_flag("--split", write_split, "Write train/dev/test files next to --out");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a segmenter and tune its threshold");
  common(train_cmd);
  train_cmd->add_option("--train", train_path, "Training JSONL");
  train_cmd->add_option("--dev", dev_path, "Development JSONL");
  train_cmd->add_option("--vectors", vectors_path, "External sentence vectors");

  CLI::App* eval = app.add_subcommand("eval", "Score a model or a hypothesis file");
  common(eval);
  eval->add_option("--data", data_path, "Reference JSONL");
  eval->add_option("--model", model_path, "Checkpoint");
  eval->add_option("--hyp", hyp_path, "Hypothesis JSONL of {id, labels}");
  eval->add_option("--vectors", vectors_path, "External sentence vectors");

  CLI::App* transfer = app.add_subcommand("transfer", "Evaluate a frozen model on other corpora");
  common(transfer);
  transfer->add_option("--model", model_path, "Checkpoint");
  transfer->add_option("--target", targets, "Target JSONL (repeatable)");
  transfer->add_option("--vectors", vectors_path, "External sentence vectors");

  CLI::App* bench = app.add_subcommand("bench", "Parameter counts and throughput");
  common(bench);
  bench->add_option("--data", data_path, "Corpus JSONL (default: synthetic)");
  bench->add_option("--vectors", vectors_path, "External sentence vectors");
  bench->add_option("--variants", bench_variants, "basic, discourse or both")
      ->check(CLI::IsMember({"basic", "discourse", "both"}));

  std::vector<const char*> argv{"topseg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  CLI::App* chosen = app.get_subcommands().front();
  try {
    RunConfig cfg;
    cfg.command = chosen->get_name();
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + s + "'");
      apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (!variant.empty()) apply_setting(cfg, "variant", variant);
    if (!out_path.empty()) cfg.out = out_path;
    if (!train_path.empty()) cfg.train_path = train_path;
    if (!dev_path.empty()) cfg.dev_path = dev_path;
    if (!data_path.empty()) cfg.data_path = data_path;
    if (!hyp_path.empty()) cfg.hyp_path = hyp_path;
    if (!model_path.empty()) cfg.model_path = model_path;
    if (!vectors_path.empty()) cfg.vectors_path = vectors_path;
    if (!targets.empty()) cfg.targets.assign(targets.begin(), targets.end());
    if (!bench_variants.empty()) apply_setting(cfg, "bench.variants", bench_variants);
    if (write_split) cfg.write_split = true;

    std::vector<fs::path> inputs(cfg.targets.begin(), cfg.targets.end());
    for (const auto* p : {&cfg.train_path, &cfg.dev_path, &cfg.data_path, &cfg.hyp_path,
                          &cfg.model_path, &cfg.vectors_path}) {
      if (*p) inputs.push_back(**p);
    }
    for (const auto& p : inputs) {
      if (!fs::exists(p)) throw ValidationError("input " + p.string() + " does not exist");
    }
    if (cfg.out && cfg.out->has_parent_path()) {
      std::error_code ec;
      fs::create_directories(cfg.out->parent_path(), ec);
      if (ec) throw IoError("cannot create " + cfg.out->parent_path().string() + ": " + ec.message());
    }

    if (cfg.command == "synth") cmd_synth(cfg, out, err);
    else if (cfg.command == "train") cmd_train(cfg, out, err);
    else if (cfg.command == "eval") cmd_eval(cfg, out, err);
    else if (cfg.command == "transfer") cmd_transfer(cfg, out, err);
    else cmd_bench(cfg, out, err);
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace topseg::cli
