#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "topseg/corpus.hpp"
#include "topseg/discourse_graph.hpp"
#include "topseg/encoder.hpp"
#include "topseg/gat.hpp"
#include "topseg/layers.hpp"
#include "topseg/params.hpp"

namespace topseg {

enum class Variant { basic, discourse };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

struct ModelConfig {
  Variant variant = Variant::basic;
  EncoderConfig encoder;
  GatConfig gat;
  int predictor_hidden = 128;
  bool symmetrize = false;
  double init_scale = 0.08;
};

// A document ready for the model: token ids (trainable mode) or sentence
// vectors (external mode), plus the discourse graph.
struct PreparedDoc {
  const Document* doc = nullptr;
  std::vector<std::vector<int>> token_ids;
  std::optional<Matrix> sentence_vectors;
  DiscourseGraph graph;
};

// Parser-error emulation applied when graphs are built. Each document gets
// its own noise stream derived from noise_seed and its position.
struct GraphOptions {
  double flip_rate = 0.0;
  std::uint64_t noise_seed = 0;
};

struct Prediction {
  Vector probs;
  std::vector<int> boundaries;
};

// boundaries[i] = probs[i] >= tau for i < n-1; the last entry is always 1.
std::vector<int> infer_boundaries(const Vector& probs, double tau);

class SegmenterModel {
 public:
  SegmenterModel(ModelConfig cfg, Vocabulary vocab, std::uint64_t seed);
  SegmenterModel(const SegmenterModel& other);
  SegmenterModel& operator=(const SegmenterModel& other);
  SegmenterModel(SegmenterModel&&) noexcept = default;
  SegmenterModel& operator=(SegmenterModel&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const Encoder& encoder() const { return encoder_; }
  const Gat* gat() const { return gat_ ? &*gat_ : nullptr; }

  std::optional<double> tau() const { return tau_; }
  void set_tau(double tau);

  // Fetches sentence vectors from external when the encoder is external;
  // missing ids are an error at this point.
  PreparedDoc prepare(const Document& doc, const GraphOptions& graph_opts,
                      const ExternalVectors* external = nullptr) const;
  std::vector<PreparedDoc> prepare(const Corpus& corpus,
                                   const GraphOptions& graph_opts,
                                   const ExternalVectors* external = nullptr) const;

  // P(boundary) per sentence.
  Vector forward(const PreparedDoc& doc) const;

  // Requires a tuned tau.
  Prediction predict(const PreparedDoc& doc) const;
  Prediction predict(const PreparedDoc& doc, double tau) const;

  // Mean cross-entropy over sentences 0..n-2, gradients accumulated into
  // params().grad scaled by grad_scale. Single-sentence documents contribute
  // zero loss.
  double loss_and_backward(const PreparedDoc& doc, double grad_scale = 1.0,
                           bool training = false,
                           std::uint64_t dropout_seed = 0);

  // Logits (n x 2) and their gradient; gradients are accumulated as in
  // loss_and_backward.
  struct LossDetail {
    double loss = 0.0;
    Matrix logits;
    Matrix d_logits;
  };
  LossDetail loss_detail(const PreparedDoc& doc);

 private:
  void bind();
  double run(const PreparedDoc& doc, double grad_scale, bool training,
             std::uint64_t dropout_seed, LossDetail* detail);

  ModelConfig cfg_;
  Vocabulary vocab_;
  ParamSet params_;
  Encoder encoder_;
  std::optional<Gat> gat_;
  Mlp predictor_;
  std::optional<double> tau_;
};

// Versioned binary container: magic, version, JSON header (config, vocab,
// tau, tensor table), raw float64 tensors, trailing CRC-32.
void save_checkpoint(const SegmenterModel& model,
                     const std::filesystem::path& path);
SegmenterModel load_checkpoint(const std::filesystem::path& path,
                               std::optional<Variant> expected = {});
std::string checkpoint_bytes(const SegmenterModel& model);
SegmenterModel checkpoint_from_bytes(const std::string& bytes,
                                     std::optional<Variant> expected = {});

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 8;
  int max_epochs = 50;
  // Epochs without dev improvement before stopping; 0 disables early
  // stopping.
  int patience = 10;
  std::uint64_t seed = 0;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

void validate_train_config(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_pk = 0.0;
};

struct TrainResult {
  SegmenterModel model;
  int best_epoch = 0;
  double best_dev_pk = 1.0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains a fresh model of cfg.variant. Dev Pk (tau = 0.5) selects the
// returned checkpoint. Model parameters are seeded from train_cfg.seed.
TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus,
                  const ModelConfig& cfg, const TrainConfig& train_cfg,
                  const GraphOptions& graph_opts = {},
                  const ExternalVectors* external = nullptr,
                  const EpochCallback& on_epoch = {});

// Same loop over already-prepared documents and an existing model.
TrainResult train_prepared(SegmenterModel model,
                           const std::vector<PreparedDoc>& train_docs,
                           const std::vector<PreparedDoc>& dev_docs,
                           const TrainConfig& train_cfg,
                           const EpochCallback& on_epoch = {});

// Mean Pk over documents at a fixed tau; documents with n <= k are skipped.
double mean_pk(const SegmenterModel& model, const std::vector<PreparedDoc>& docs,
               double tau);

// {0.05, 0.10, ..., 0.95}
std::vector<double> threshold_grid();

// Grid search over precomputed probabilities; ties toward the smaller tau.
double best_threshold(const std::vector<Vector>& probs,
                      const std::vector<std::vector<int>>& reference_labels);

// Grid search on dev Pk, ties toward the smaller tau; stores tau in model.
double tune_threshold(SegmenterModel& model,
                      const std::vector<PreparedDoc>& dev_docs);

}  // namespace topseg
