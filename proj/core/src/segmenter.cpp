#include "topseg/segmenter.hpp"

#include <cmath>
#include <random>

#include "topseg/error.hpp"

namespace topseg {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

// Row softmax over two logits; returns the boundary probability column.
Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return out;
}

}  // namespace

std::string to_string(Variant v) {
  return v == Variant::basic ? "basic" : "discourse";
}

Variant parse_variant(const std::string& text) {
  if (text == "basic") return Variant::basic;
  if (text == "discourse") return Variant::discourse;
  throw ValidationError("unknown variant '" + text + "' (expected basic|discourse)");
}

std::vector<int> infer_boundaries(const Vector& probs, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ValidationError("threshold must lie in (0, 1)");
  }
  const Eigen::Index n = probs.size();
  std::vector<int> out(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i + 1 < n; ++i) out[i] = probs(i) >= tau ? 1 : 0;
  if (n > 0) out.back() = 1;
  return out;
}

SegmenterModel::SegmenterModel(ModelConfig cfg, Vocabulary vocab,
                               std::uint64_t seed)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
  if (cfg_.encoder.sentence_encoder == SentenceEncoderKind::trainable) {
    cfg_.encoder.vocab_size = vocab_.size();
  }
  if (cfg_.predictor_hidden < 1) {
    throw ValidationError("predictor hidden size must be positive");
  }
  bind();
  params_.init_uniform(cfg_.init_scale, seed);
}

SegmenterModel::SegmenterModel(const SegmenterModel& other)
    : cfg_(other.cfg_), vocab_(other.vocab_), tau_(other.tau_) {
  bind();
  params_.restore(other.params_.snapshot());
}

SegmenterModel& SegmenterModel::operator=(const SegmenterModel& other) {
  if (this != &other) {
    SegmenterModel tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

void SegmenterModel::bind() {
  encoder_ = Encoder(params_, cfg_.encoder);
  const int state = cfg_.encoder.state_dim();
  int predictor_in = state;
  if (cfg_.variant == Variant::discourse) {
    gat_.emplace(params_, cfg_.gat, state);
    predictor_in += cfg_.gat.dim;
  }
  predictor_ = Mlp(params_, "predictor", predictor_in, cfg_.predictor_hidden, 2);
}

void SegmenterModel::set_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ValidationError("threshold must lie in (0, 1)");
  }
  tau_ = tau;
}

PreparedDoc SegmenterModel::prepare(const Document& doc,
                                    const GraphOptions& graph_opts,
                                    const ExternalVectors* external) const {
  PreparedDoc out;
  out.doc = &doc;
  const int n = static_cast<int>(doc.size());
  if (cfg_.encoder.sentence_encoder == SentenceEncoderKind::trainable) {
    out.token_ids.reserve(doc.size());
    for (const Sentence& s : doc.sentences) out.token_ids.push_back(vocab_.encode(s));
  } else {
    if (!external) throw ValidationError("external sentence vectors were not provided");
    auto it = external->find(doc.id);
    if (it == external->end()) {
      throw ValidationError("no external vectors for document '" + doc.id + "'");
    }
    if (it->second.rows() != n || it->second.cols() != cfg_.encoder.sentence_dim()) {
      throw ValidationError("external vectors for '" + doc.id + "' have shape " +
                            std::to_string(it->second.rows()) + "x" +
                            std::to_string(it->second.cols()));
    }
    out.sentence_vectors = it->second;
  }
  if (cfg_.variant == Variant::discourse) {
    out.graph = graph_for_document(doc, cfg_.symmetrize, graph_opts.flip_rate,
                                   graph_opts.noise_seed);
  } else {
    out.graph = DiscourseGraph::identity(n);
  }
  return out;
}

std::vector<PreparedDoc> SegmenterModel::prepare(
    const Corpus& corpus, const GraphOptions& graph_opts,
    const ExternalVectors* external) const {
  std::vector<PreparedDoc> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    GraphOptions per_doc = graph_opts;
    per_doc.noise_seed = mix_seed(graph_opts.noise_seed, i);
    out.push_back(prepare(corpus.documents[i], per_doc, external));
  }
  return out;
}

namespace {

struct ForwardCache {
  EncoderCache encoder;
  GatCache gat;
  MlpCache mlp;
  Matrix states;
};

}  // namespace

Vector SegmenterModel::forward(const PreparedDoc& doc) const {
  const Matrix vectors = doc.sentence_vectors
                             ? *doc.sentence_vectors
                             : encoder_.encode_sentences(doc.token_ids, nullptr);
  const Matrix states = encoder_.contextualize(vectors);
  Matrix features;
  if (gat_) {
    const Matrix g = gat_->forward(states, doc.graph);
    features.resize(states.rows(), states.cols() + g.cols());
    features << states, g;
  } else {
    features = states;
  }
  return softmax_rows(predictor_.forward(features, nullptr)).col(1);
}

Prediction SegmenterModel::predict(const PreparedDoc& doc, double tau) const {
  Prediction p;
  p.probs = forward(doc);
  p.boundaries = infer_boundaries(p.probs, tau);
  return p;
}

Prediction SegmenterModel::predict(const PreparedDoc& doc) const {
  if (!tau_) throw Error("model threshold has not been tuned");
  return predict(doc, *tau_);
}

SegmenterModel::LossDetail SegmenterModel::loss_detail(const PreparedDoc& doc) {
  LossDetail detail;
  run(doc, 1.0, false, 0, &detail);
  return detail;
}

double SegmenterModel::loss_and_backward(const PreparedDoc& doc,
                                         double grad_scale, bool training,
                                         std::uint64_t dropout_seed) {
  return run(doc, grad_scale, training, dropout_seed, nullptr);
}

double SegmenterModel::run(const PreparedDoc& doc, double grad_scale,
                           bool training, std::uint64_t dropout_seed,
                           LossDetail* detail) {
  ForwardCache cache;
  const Document& d = *doc.doc;
  const Eigen::Index n = static_cast<Eigen::Index>(d.size());

  const Matrix vectors = doc.sentence_vectors
                             ? *doc.sentence_vectors
                             : encoder_.encode_sentences(doc.token_ids, &cache.encoder);
  cache.states = encoder_.contextualize(vectors, &cache.encoder.context);
  Matrix features;
  if (gat_) {
    const Matrix g =
        gat_->forward(cache.states, doc.graph, &cache.gat, training, dropout_seed);
    features.resize(n, cache.states.cols() + g.cols());
    features << cache.states, g;
  } else {
    features = cache.states;
  }
  const Matrix logits = predictor_.forward(features, &cache.mlp);
  const Matrix probs = softmax_rows(logits);

  // The final sentence is a boundary by definition and is not scored.
  double loss = 0.0;
  Matrix d_logits = Matrix::Zero(n, 2);
  const Eigen::Index scored = n - 1;
  for (Eigen::Index i = 0; i < scored; ++i) {
    const int y = d.labels[static_cast<std::size_t>(i)];
    const double top = logits.row(i).maxCoeff();
    const double lse = top + std::log((logits.row(i).array() - top).exp().sum());
    loss -= logits(i, y) - lse;
    d_logits.row(i) = probs.row(i);
    d_logits(i, y) -= 1.0;
  }
  if (scored > 0) {
    loss /= static_cast<double>(scored);
    d_logits *= grad_scale / static_cast<double>(scored);
  }
  if (detail) {
    detail->loss = loss;
    detail->logits = logits;
    detail->d_logits = d_logits;
  }
  if (scored == 0) return 0.0;

  const Matrix d_features = predictor_.backward(cache.mlp, d_logits);
  const Eigen::Index state_dim = cache.states.cols();
  Matrix d_states = d_features.leftCols(state_dim);
  if (gat_) {
    d_states += gat_->backward(cache.gat, doc.graph,
                               d_features.rightCols(d_features.cols() - state_dim));
  }
  encoder_.backward(cache.encoder, d_states);
  return loss;
}

}  // namespace topseg
