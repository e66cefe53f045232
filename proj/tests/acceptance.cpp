// Acceptance run: one PASS/FAIL line per primary criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "support/gat_oracle.hpp"
#include "support/gradcheck.hpp"
#include "support/random.hpp"
#include "topseg/bench.hpp"
#include "topseg/corpus.hpp"
#include "topseg/discourse_graph.hpp"
#include "topseg/gat.hpp"
#include "topseg/metrics.hpp"
#include "topseg/segmenter.hpp"

namespace {

using namespace topseg;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Segmentation random_segmentation(std::mt19937_64& rng, int n, double p) {
  std::bernoulli_distribution coin(p);
  std::vector<int> labels(n, 0);
  for (int i = 0; i + 1 < n; ++i) labels[i] = coin(rng);
  labels.back() = 1;
  return Segmentation::from_labels(labels);
}

Outcome metric_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  int contract = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 30)(rng);
    const double p = std::uniform_real_distribution<double>(0.05, 0.9)(rng);
    const Segmentation ref = random_segmentation(rng, n, p);
    const Segmentation hyp = random_segmentation(rng, n, p);
    const int k = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const double fast = pk(ref, hyp, k);
    mismatches += fast != pk_oracle(ref, hyp, k);
    contract += pk(ref, ref, k) != 0.0 || fast < 0.0 || fast > 1.0;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && contract == 0 && secs < 10.0,
          "1000 triples, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(contract) + " contract violations, " + fmt(secs, 2) + " s"};
}

Outcome random_baseline() {
  const auto t0 = Clock::now();
  SynthConfig cfg;
  cfg.num_docs = 2000;
  cfg.seed = 17;
  const Corpus c = generate_synthetic(cfg);
  const double p = corpus_stats(c).boundary_rate;
  std::vector<std::string> ids;
  std::vector<Segmentation> refs;
  std::vector<Segmentation> hyps;
  for (std::size_t i = 0; i < c.size(); ++i) {
    ids.push_back(c.documents[i].id);
    refs.push_back(Segmentation::from_labels(c.documents[i].labels));
    hyps.push_back(random_segmenter(c.documents[i], p, 1000 + i));
  }
  const EvalReport r = score_segmentations("random", ids, refs, hyps);
  const double secs = seconds_since(t0);
  return {r.n_docs >= 2000 && r.pk >= 45.0 && r.pk <= 55.0 && secs < 60.0,
          "Pk " + fmt(r.pk) + " over " + std::to_string(r.n_docs) + " docs (p=" + fmt(p, 3) +
              "), " + fmt(secs, 2) + " s"};
}

testing::Rows to_rows(const Matrix& m) {
  testing::Rows r(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

Outcome gat_correctness() {
  std::mt19937_64 rng(99);

  // (a) attention rows.
  int row_failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 25)(rng);
    const DiscourseGraph g = build_graph(testing::random_tree(rng, n), trial % 2 == 1);
    const GatHead head{testing::random_matrix(rng, 6, 6), testing::random_matrix(rng, 12, 1).col(0)};
    const Matrix alpha =
        attention_coeffs(attention_logits(testing::random_matrix(rng, n, 6), head, g, 0.2), g);
    for (int i = 0; i < n; ++i) {
      bool ok = std::abs(alpha.row(i).sum() - 1.0) <= 1e-6;
      for (int j = 0; j < n; ++j) ok = ok && (g.edge(i, j) || alpha(i, j) == 0.0);
      row_failures += !ok;
    }
  }

  // (b) two-layer stack against the loop oracle.
  double worst_oracle = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    GatConfig cfg;
    cfg.dim = 4;
    cfg.num_heads = 2;
    cfg.num_layers = 2;
    GatParams params;
    std::vector<std::vector<testing::OracleHead>> oracle;
    for (int l = 0; l < 2; ++l) {
      GatLayerParams layer;
      std::vector<testing::OracleHead> heads;
      for (int h = 0; h < 2; ++h) {
        GatHead head{testing::random_matrix(rng, 4, 4), testing::random_matrix(rng, 8, 1).col(0)};
        heads.push_back({to_rows(head.w), {head.a.data(), head.a.data() + head.a.size()}});
        layer.heads.push_back(std::move(head));
      }
      params.layers.push_back(std::move(layer));
      oracle.push_back(std::move(heads));
    }
    const DiscourseGraph g = build_graph(testing::random_tree(rng, 5), trial % 2 == 1);
    testing::Rows adj(5, std::vector<double>(5, 0.0));
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) adj[i][j] = g.edge(i, j) ? 1.0 : 0.0;
    const Matrix x = testing::random_matrix(rng, 5, 4);
    const Matrix got = gat_forward(x, g, params, cfg);
    const testing::Rows want = testing::oracle_stack(to_rows(x), oracle, adj, 0.2);
    for (int i = 0; i < 5; ++i)
      for (int k = 0; k < 4; ++k) worst_oracle = std::max(worst_oracle, std::abs(got(i, k) - want[i][k]));
  }

  // (c) end-to-end gradients of the training loss, every tensor.
  double worst_grad = 0.0;
  std::string worst_name;
  std::size_t tensors = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig sc;
    sc.num_docs = 1;
    sc.vocab_size = 12;
    sc.num_topics = 3;
    sc.sentences_per_segment = {2, 3};
    sc.segments_per_doc = {2, 3};
    sc.tokens_per_sentence = {2, 3};
    sc.seed = seed;
    const Corpus c = generate_synthetic(sc);
    for (bool sym : {false, true}) {
      ModelConfig mc;
      mc.variant = Variant::discourse;
      mc.encoder.embed_dim = 3;
      mc.encoder.hidden_dim = 3;
      mc.gat.dim = 4;
      mc.gat.num_heads = 2;
      mc.predictor_hidden = 5;
      mc.symmetrize = sym;
      mc.init_scale = 1.0;
      SegmenterModel m(mc, Vocabulary::build(c), seed);
      const PreparedDoc doc = m.prepare(c.documents[0], {});
      SegmenterModel probe = m;
      const auto checks = testing::finite_difference_check(
          m.params(),
          [&] {
            probe.params().restore(m.params().snapshot());
            return probe.loss_and_backward(doc);
          },
          [&] { m.loss_and_backward(doc); }, 1e-5);
      tensors = checks.size();
      for (const auto& ch : checks) {
        if (ch.relative_error > worst_grad) {
          worst_grad = ch.relative_error;
          worst_name = ch.name;
        }
      }
    }
  }

  const bool pass = row_failures == 0 && worst_oracle <= 1e-8 && worst_grad < 1e-4;
  std::ostringstream d;
  d << "(a) " << row_failures << " bad rows over 100 graphs; (b) max |diff| " << worst_oracle
    << " on 20 instances; (c) max rel err " << worst_grad << " (" << worst_name << ") over "
    << tensors << " tensors x 10 models";
  return {pass, d.str()};
}

// Desk-scale setting used for the learning experiments.
struct Experiment {
  static constexpr int kDocs = 600;
  static constexpr int kEpochs = 20;
};

struct SplitData {
  CorpusSplit parts;
};

SplitData make_data(std::uint64_t seed) {
  SynthConfig sc;
  sc.num_docs = Experiment::kDocs;
  sc.vocab_size = 200;
  sc.num_topics = 10;
  sc.seed = seed;
  const Corpus c = generate_synthetic(sc);
  const double n = Experiment::kDocs;
  return {split(c, SplitRatios{500 / n, 50 / n, 50 / n}, seed)};
}

double train_and_test(const SplitData& data, Variant v, double flip, std::uint64_t seed) {
  ModelConfig mc;
  mc.variant = v;
  mc.encoder.embed_dim = 16;
  mc.encoder.hidden_dim = 16;
  mc.gat.dim = 32;
  mc.predictor_hidden = 32;
  TrainConfig tc;
  tc.lr = 1e-2;
  tc.max_epochs = Experiment::kEpochs;
  tc.patience = 0;
  tc.seed = seed;
  SegmenterModel model(mc, Vocabulary::build(data.parts.train), seed);
  const auto train_docs = model.prepare(data.parts.train, GraphOptions{flip, seed * 3 + 0});
  const auto dev_docs = model.prepare(data.parts.dev, GraphOptions{flip, seed * 3 + 1});
  const auto test_docs = model.prepare(data.parts.test, GraphOptions{flip, seed * 3 + 2});
  TrainResult r = train_prepared(std::move(model), train_docs, dev_docs, tc);
  tune_threshold(r.model, dev_docs);
  return evaluate(r.model, "test", test_docs).pk;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

struct LearningRuns {
  std::map<std::pair<int, std::uint64_t>, double> discourse;  // (flip x10, seed)
  std::map<std::uint64_t, double> basic;
  double direction_seconds = 0.0;
};

LearningRuns run_learning() {
  LearningRuns runs;
  const auto t0 = Clock::now();
  std::map<std::uint64_t, SplitData> data;
  for (auto seed : kSeeds) {
    data.emplace(seed, make_data(seed));
    runs.basic[seed] = train_and_test(data.at(seed), Variant::basic, 0.0, seed);
    runs.discourse[{0, seed}] = train_and_test(data.at(seed), Variant::discourse, 0.0, seed);
    std::cerr << "  seed " << seed << ": basic " << fmt(runs.basic[seed]) << ", discourse "
              << fmt(runs.discourse[{0, seed}]) << '\n';
  }
  runs.direction_seconds = seconds_since(t0);
  for (int flip10 : {4, 8}) {
    for (auto seed : kSeeds) {
      runs.discourse[{flip10, seed}] =
          train_and_test(data.at(seed), Variant::discourse, flip10 / 10.0, seed);
      std::cerr << "  seed " << seed << ", flip " << flip10 / 10.0 << ": discourse "
                << fmt(runs.discourse[{flip10, seed}]) << '\n';
    }
  }
  return runs;
}

std::string joined(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

Outcome direction_of_effect(const LearningRuns& runs) {
  std::vector<double> basic;
  std::vector<double> disc;
  for (auto seed : kSeeds) {
    basic.push_back(runs.basic.at(seed));
    disc.push_back(runs.discourse.at({0, seed}));
  }
  const double mb = median(basic);
  const double md = median(disc);
  return {mb - md >= 2.0 && runs.direction_seconds < 1800.0,
          "median test Pk basic " + fmt(mb) + " [" + joined(basic) + "] vs discourse " + fmt(md) +
              " [" + joined(disc) + "], gap " + fmt(mb - md) + ", " +
              fmt(runs.direction_seconds, 0) + " s"};
}

Outcome noise_monotonicity(const LearningRuns& runs) {
  std::vector<double> medians;
  std::string detail;
  for (int flip10 : {0, 4, 8}) {
    std::vector<double> v;
    for (auto seed : kSeeds) v.push_back(runs.discourse.at({flip10, seed}));
    medians.push_back(median(v));
    detail += (detail.empty() ? "" : ", ") + std::string("flip ") + fmt(flip10 / 10.0) +
              " -> " + fmt(medians.back()) + " [" + joined(v) + "]";
  }
  const bool pass = medians[0] <= medians[1] && medians[1] <= medians[2];
  return {pass, "median discourse test Pk: " + detail};
}

Outcome efficiency() {
  ModelConfig shared;
  shared.encoder.sentence_encoder = SentenceEncoderKind::external;
  shared.encoder.external_dim = 32;
  shared.variant = Variant::basic;
  const SegmenterModel basic(shared, Vocabulary{}, 1);
  shared.variant = Variant::discourse;
  const SegmenterModel disc(shared, Vocabulary{}, 1);

  std::size_t predictor = 0;
  for (const auto& [name, p] : basic.params())
    if (name.rfind("predictor.", 0) == 0) predictor += static_cast<std::size_t>(p.value.size());

  const BenchReport b{"basic", 4820000, 6.90, 35.58, "", ""};
  const BenchReport d{"discourse", 7970000, 5.44, 32.85, "", ""};
  const Overhead o = relative_overhead(b, d);
  const double params_pct = std::round(o.params_pct * 10) / 10;
  const double infer_pct = std::round(o.i_speed_pct * 10) / 10;
  const double train_pct = std::round(o.t_speed_pct);

  const bool pass = count_params(disc) > count_params(basic) && predictor == 65922 &&
                    params_pct == 65.4 && infer_pct == 7.7 && train_pct == 21.0;
  return {pass, "params basic " + std::to_string(count_params(basic)) + " < discourse " +
                    std::to_string(count_params(disc)) + "; predictor " +
                    std::to_string(predictor) + "; published-figure overhead params +" +
                    fmt(params_pct) + "%, training " + fmt(train_pct, 0) + "%, inference " +
                    fmt(infer_pct) + "%"};
}

Outcome inference_contract() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto grid = threshold_grid();
  long checks = 0;
  long violations = 0;
  for (int n = 1; n <= 8; ++n) {
    for (int trial = 0; trial < 2000; ++trial) {
      Vector p(n);
      // Every other trial snaps to the grid so ties with tau are exercised.
      for (int i = 0; i < n; ++i) {
        p(i) = trial % 2 ? std::round(u(rng) * 20.0) / 20.0 : u(rng);
      }
      std::vector<int> prev;
      for (double tau : grid) {
        const auto b = infer_boundaries(p, tau);
        ++checks;
        bool ok = static_cast<int>(b.size()) == n && b.back() == 1;
        for (int i = 0; i + 1 < n && ok; ++i) ok = b[i] == (p(i) >= tau ? 1 : 0);
        for (int i = 0; i < n && ok && !prev.empty(); ++i) ok = b[i] <= prev[i];
        violations += !ok;
        prev = b;
      }
    }
  }
  return {violations == 0, std::to_string(checks) + " (vector, tau) checks for n <= 8, " +
                               std::to_string(violations) + " violations"};
}

Outcome train_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "topseg_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream sink;

  cli::RunConfig synth;
  synth.command = "synth";
  synth.seed = 11;
  synth.synth.num_docs = 40;
  synth.synth.vocab_size = 100;
  synth.write_split = true;
  synth.out = dir / "corpus.jsonl";
  cli::cmd_synth(synth, sink, sink);

  auto train_once = [&](const std::string& name) {
    cli::RunConfig cfg;
    cfg.command = "train";
    cfg.seed = 5;
    cfg.model.variant = Variant::discourse;
    cfg.model.encoder.embed_dim = 8;
    cfg.model.encoder.hidden_dim = 8;
    cfg.model.gat.dim = 16;
    cfg.model.predictor_hidden = 16;
    cfg.train.max_epochs = 3;
    cfg.flip_rate = 0.3;
    cfg.train_path = dir / "corpus.train.jsonl";
    cfg.dev_path = dir / "corpus.dev.jsonl";
    cfg.out = dir / name;
    return cli::cmd_train(cfg, sink, sink);
  };
  const auto a = train_once("a.ckpt");
  const auto b = train_once("b.ckpt");
  fs::remove_all(dir);
  return {a.dev_pk == b.dev_pk && a.checkpoint_sha256 == b.checkpoint_sha256,
          "dev Pk " + fmt(a.dev_pk) + " / " + fmt(b.dev_pk) + ", sha256 " +
              a.checkpoint_sha256.substr(0, 16) + "... / " + b.checkpoint_sha256.substr(0, 16) +
              "..."};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  };

  report("metric-oracle-equivalence", metric_oracle());
  report("random-baseline-calibration", random_baseline());
  report("gat-correctness", gat_correctness());
  report("efficiency-directions", efficiency());
  report("inference-contract", inference_contract());
  report("train-determinism", train_determinism());

  std::cerr << "training " << kSeeds.size() * 4 << " models for the learning criteria\n";
  const LearningRuns runs = run_learning();
  report("direction-of-effect", direction_of_effect(runs));
  report("noise-monotonicity", noise_monotonicity(runs));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
