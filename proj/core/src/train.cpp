#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "topseg/error.hpp"
#include "topseg/metrics.hpp"
#include "topseg/segmenter.hpp"

namespace topseg {
namespace {

// Pk of one thresholded prediction; nullopt when the window is undefined.
std::optional<double> doc_pk(const std::vector<int>& ref_labels,
                             const std::vector<int>& hyp_labels) {
  const Segmentation ref = Segmentation::from_labels(ref_labels);
  const int k = window_size(ref);
  if (ref.size() <= k) return std::nullopt;
  return pk(ref, Segmentation::from_labels(hyp_labels), k);
}

double mean_pk_from_probs(const std::vector<Vector>& probs,
                          const std::vector<std::vector<int>>& refs, double tau) {
  double total = 0.0;
  int counted = 0;
  for (std::size_t d = 0; d < probs.size(); ++d) {
    if (auto v = doc_pk(refs[d], infer_boundaries(probs[d], tau))) {
      total += *v;
      ++counted;
    }
  }
  return counted == 0 ? 0.0 : total / counted;
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ValidationError("train: lr must be positive");
  if (cfg.batch_size < 1) throw ValidationError("train: batch_size must be positive");
  if (cfg.max_epochs < 1) throw ValidationError("train: max_epochs must be positive");
  if (cfg.patience < 0) throw ValidationError("train: patience must be >= 0");
  if (cfg.clip_norm < 0.0) throw ValidationError("train: clip_norm must be >= 0");
}

std::vector<double> threshold_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 19; ++k) grid.push_back(k / 20.0);
  return grid;
}

double mean_pk(const SegmenterModel& model, const std::vector<PreparedDoc>& docs,
               double tau) {
  std::vector<Vector> probs;
  std::vector<std::vector<int>> refs;
  for (const PreparedDoc& d : docs) {
    probs.push_back(model.forward(d));
    refs.push_back(d.doc->labels);
  }
  return mean_pk_from_probs(probs, refs, tau);
}

double best_threshold(const std::vector<Vector>& probs,
                      const std::vector<std::vector<int>>& reference_labels) {
  if (probs.empty()) throw ValidationError("threshold tuning needs a nonempty dev set");
  double best_tau = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (double tau : threshold_grid()) {
    const double v = mean_pk_from_probs(probs, reference_labels, tau);
    if (v < best) {
      best = v;
      best_tau = tau;
    }
  }
  return best_tau;
}

double tune_threshold(SegmenterModel& model, const std::vector<PreparedDoc>& dev_docs) {
  if (dev_docs.empty()) throw ValidationError("threshold tuning needs a nonempty dev set");
  std::vector<Vector> probs;
  std::vector<std::vector<int>> refs;
  for (const PreparedDoc& d : dev_docs) {
    probs.push_back(model.forward(d));
    refs.push_back(d.doc->labels);
  }
  const double tau = best_threshold(probs, refs);
  model.set_tau(tau);
  return tau;
}

TrainResult train_prepared(SegmenterModel model,
                           const std::vector<PreparedDoc>& train_docs,
                           const std::vector<PreparedDoc>& dev_docs,
                           const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate_train_config(cfg);
  if (train_docs.empty()) throw ValidationError("training corpus is empty");
  if (dev_docs.empty()) throw ValidationError("dev corpus is empty");

  Adam adam(AdamConfig{.lr = cfg.lr});
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{std::move(model), 0, std::numeric_limits<double>::infinity(), {}};
  SegmenterModel& m = result.model;
  auto best = m.params().snapshot();
  int since_best = 0;
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      m.params().zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const PreparedDoc& doc = train_docs[order[b]];
        const double loss = m.loss_and_backward(doc, scale, true, cfg.seed ^ (step * 8 + b));
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "non-finite loss " << loss << " at epoch " << epoch << ", document '"
              << doc.doc->id << "', optimizer step " << adam.steps();
          throw TrainingError(msg.str());
        }
        epoch_loss += loss;
      }
      if (!std::isfinite(m.params().grad_norm())) {
        throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch));
      }
      if (cfg.clip_norm > 0.0) {
        const double norm = m.params().grad_norm();
        if (norm > cfg.clip_norm) m.params().scale_grad(cfg.clip_norm / norm);
      }
      adam.step(m.params());
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train_docs.size());
    rec.dev_pk = mean_pk(m, dev_docs, 0.5);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.dev_pk < result.best_dev_pk) {
      result.best_dev_pk = rec.dev_pk;
      result.best_epoch = epoch;
      best = m.params().snapshot();
      since_best = 0;
    } else {
      ++since_best;
    }
    if (cfg.patience > 0 && since_best >= cfg.patience) break;
  }
  m.params().restore(best);
  m.params().zero_grad();
  return result;
}

TrainResult train(const Corpus& train_corpus, const Corpus& dev_corpus,
                  const ModelConfig& cfg, const TrainConfig& train_cfg,
                  const GraphOptions& graph_opts, const ExternalVectors* external,
                  const EpochCallback& on_epoch) {
  if (train_corpus.empty()) throw ValidationError("training corpus is empty");
  if (dev_corpus.empty()) throw ValidationError("dev corpus is empty");
  Vocabulary vocab = cfg.encoder.sentence_encoder == SentenceEncoderKind::trainable
                         ? Vocabulary::build(train_corpus)
                         : Vocabulary();
  SegmenterModel model(cfg, std::move(vocab), train_cfg.seed);
  const auto train_docs = model.prepare(train_corpus, graph_opts, external);
  GraphOptions dev_opts = graph_opts;
  dev_opts.noise_seed = graph_opts.noise_seed + 0x9e3779b97f4a7c15ULL;
  const auto dev_docs = model.prepare(dev_corpus, dev_opts, external);
  return train_prepared(std::move(model), train_docs, dev_docs, train_cfg, on_epoch);
}

}  // namespace topseg
