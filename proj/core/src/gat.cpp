#include "topseg/gat.hpp"

#include <cmath>
#include <random>

#include "topseg/error.hpp"

namespace topseg {
namespace {

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

struct HeadOutput {
  Matrix projected;
  Matrix logits_pre;
  Matrix alpha;
  Matrix z;
};

// Row softmax over N_i in place on `alpha`, reading logits from `e`.
void masked_softmax(const Matrix& e, const DiscourseGraph& graph, Matrix& alpha) {
  const int n = graph.size();
  alpha.setZero(n, n);
  for (int i = 0; i < n; ++i) {
    auto nb = graph.neighbors(i);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int j : nb) max_logit = std::max(max_logit, e(i, j));
    double total = 0.0;
    for (int j : nb) {
      alpha(i, j) = std::exp(e(i, j) - max_logit);
      total += alpha(i, j);
    }
    for (int j : nb) alpha(i, j) /= total;
  }
}

HeadOutput head_forward(const Matrix& g, const Eigen::Ref<const Matrix>& w,
                        const Eigen::Ref<const Vector>& a,
                        const DiscourseGraph& graph, double slope) {
  const int n = graph.size();
  const Eigen::Index d = w.rows();
  HeadOutput out;
  out.projected = g * w.transpose();
  const Vector s_head = out.projected * a.head(d);
  const Vector s_dep = out.projected * a.tail(d);
  out.logits_pre = Matrix::Zero(n, n);
  Matrix e = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j : graph.neighbors(i)) {
      out.logits_pre(i, j) = s_head(i) + s_dep(j);
      e(i, j) = leaky_relu(out.logits_pre(i, j), slope);
    }
  }
  masked_softmax(e, graph, out.alpha);
  out.z = out.alpha * out.projected;
  return out;
}

void check_shapes(const Matrix& g, const Matrix& w, const Vector& a,
                  const DiscourseGraph& graph) {
  if (g.rows() != graph.size()) {
    throw ValidationError("GAT: node count " + std::to_string(g.rows()) +
                          " does not match graph size " +
                          std::to_string(graph.size()));
  }
  if (w.cols() != g.cols()) {
    throw ValidationError("GAT: weight expects input width " +
                          std::to_string(w.cols()) + ", got " +
                          std::to_string(g.cols()));
  }
  if (a.size() != 2 * w.rows()) {
    throw ValidationError("GAT: attention vector must have length 2 * dim");
  }
}

}  // namespace

void validate_gat_config(const GatConfig& cfg) {
  if (cfg.num_layers < 1) throw ValidationError("gat: num_layers must be >= 1");
  if (cfg.num_heads < 1) throw ValidationError("gat: num_heads must be >= 1");
  if (cfg.dim < 1) throw ValidationError("gat: dim must be positive");
  if (cfg.leaky_slope < 0.0) throw ValidationError("gat: leaky_slope must be >= 0");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw ValidationError("gat: dropout must lie in [0, 1)");
  }
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

Matrix attention_logits(const Matrix& g, const GatHead& head,
                        const DiscourseGraph& graph, double leaky_slope) {
  check_shapes(g, head.w, head.a, graph);
  const Eigen::Index d = head.w.rows();
  const Matrix projected = g * head.w.transpose();
  const Vector s_head = projected * head.a.head(d);
  const Vector s_dep = projected * head.a.tail(d);
  Matrix e = Matrix::Zero(graph.size(), graph.size());
  for (int i = 0; i < graph.size(); ++i) {
    for (int j : graph.neighbors(i)) {
      e(i, j) = leaky_relu(s_head(i) + s_dep(j), leaky_slope);
    }
  }
  return e;
}

Matrix attention_coeffs(const Matrix& logits, const DiscourseGraph& graph) {
  if (logits.rows() != graph.size() || logits.cols() != graph.size()) {
    throw ValidationError("GAT: logits shape does not match graph");
  }
  Matrix alpha;
  masked_softmax(logits, graph, alpha);
  return alpha;
}

Matrix aggregate(const Matrix& alpha, const Matrix& g, const Matrix& w) {
  if (alpha.cols() != g.rows() || w.cols() != g.cols()) {
    throw ValidationError("GAT: aggregate shape mismatch");
  }
  return alpha * (g * w.transpose());
}

Matrix layer_forward(const Matrix& g, const GatLayerParams& params,
                     const DiscourseGraph& graph, const GatConfig& cfg) {
  if (params.heads.empty()) throw ValidationError("GAT: layer has no heads");
  Matrix zbar = Matrix::Zero(g.rows(), g.cols());
  for (const GatHead& head : params.heads) {
    check_shapes(g, head.w, head.a, graph);
    if (head.w.rows() != g.cols()) {
      throw ValidationError("GAT: residual update needs square per-head weights");
    }
    zbar += head_forward(g, head.w, head.a, graph, cfg.leaky_slope).z;
  }
  zbar /= static_cast<double>(params.heads.size());
  return (g + zbar).unaryExpr([](double x) { return elu(x); });
}

Matrix gat_forward(const Matrix& states, const DiscourseGraph& graph,
                   const GatParams& params, const GatConfig& cfg) {
  Matrix g = states;
  if (params.input_weight) {
    g = states * params.input_weight->transpose();
    if (params.input_bias) g.rowwise() += params.input_bias->transpose();
  }
  if (g.cols() != cfg.dim) {
    throw ValidationError("GAT: input width " + std::to_string(g.cols()) +
                          " does not match dim " + std::to_string(cfg.dim));
  }
  for (const GatLayerParams& layer : params.layers) {
    g = layer_forward(g, layer, graph, cfg);
  }
  return g;
}

Gat::Gat(ParamSet& params, const GatConfig& cfg, int input_dim) : cfg_(cfg) {
  validate_gat_config(cfg);
  if (input_dim != cfg.dim) {
    projection_.emplace(params, "gat.input", input_dim, cfg.dim);
  }
  heads_.resize(static_cast<std::size_t>(cfg.num_layers));
  for (int l = 0; l < cfg.num_layers; ++l) {
    for (int h = 0; h < cfg.num_heads; ++h) {
      const std::string prefix =
          "gat.layer" + std::to_string(l) + ".head" + std::to_string(h);
      HeadRef ref;
      ref.w = &params.add(prefix + ".w", cfg.dim, cfg.dim);
      ref.a = &params.add(prefix + ".a", 2 * cfg.dim, 1);
      heads_[l].push_back(ref);
    }
  }
}

Matrix Gat::forward(const Matrix& states, const DiscourseGraph& graph,
                    GatCache* cache, bool training,
                    std::uint64_t rng_seed) const {
  if (states.rows() != graph.size()) {
    throw ValidationError("GAT: node count does not match graph size");
  }
  Matrix g = projection_ ? projection_->forward(states) : states;
  if (g.cols() != cfg_.dim) {
    throw ValidationError("GAT: input width does not match dim");
  }
  const bool use_dropout = training && cfg_.dropout > 0.0;
  std::mt19937_64 rng(rng_seed);
  std::bernoulli_distribution keep(1.0 - cfg_.dropout);
  if (cache) {
    cache->states = states;
    cache->layers.assign(heads_.size(), {});
  }

  for (std::size_t l = 0; l < heads_.size(); ++l) {
    Matrix zbar = Matrix::Zero(g.rows(), g.cols());
    GatLayerCache* lc = cache ? &cache->layers[l] : nullptr;
    for (const HeadRef& head : heads_[l]) {
      HeadOutput out = head_forward(g, head.w->value, head.a->value.col(0),
                                    graph, cfg_.leaky_slope);
      zbar += out.z;
      if (lc) {
        lc->projected.push_back(std::move(out.projected));
        lc->logits_pre.push_back(std::move(out.logits_pre));
        lc->alpha.push_back(std::move(out.alpha));
      }
    }
    zbar /= static_cast<double>(heads_[l].size());
    if (use_dropout) {
      Matrix mask(zbar.rows(), zbar.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c) {
        for (Eigen::Index r = 0; r < mask.rows(); ++r) {
          mask(r, c) = keep(rng) ? 1.0 / (1.0 - cfg_.dropout) : 0.0;
        }
      }
      zbar = zbar.cwiseProduct(mask);
      if (lc) lc->dropout_mask = std::move(mask);
    }
    Matrix pre = g + zbar;
    if (lc) lc->input = std::move(g);
    g = pre.unaryExpr([](double x) { return elu(x); });
    if (lc) lc->pre = std::move(pre);
  }
  return g;
}

Matrix Gat::backward(const GatCache& cache, const DiscourseGraph& graph,
                     const Matrix& d_out) const {
  const int n = graph.size();
  const Eigen::Index d = cfg_.dim;
  Matrix d_g = d_out;
  for (std::size_t l = heads_.size(); l-- > 0;) {
    const GatLayerCache& lc = cache.layers[l];
    const Matrix d_pre = d_g.cwiseProduct(lc.pre.unaryExpr(
        [](double x) { return x > 0.0 ? 1.0 : std::exp(x); }));
    Matrix d_in = d_pre;
    Matrix d_z = d_pre / static_cast<double>(heads_[l].size());
    if (lc.dropout_mask.size() > 0) d_z = d_z.cwiseProduct(lc.dropout_mask);

    for (std::size_t h = 0; h < heads_[l].size(); ++h) {
      const HeadRef& head = heads_[l][h];
      const Matrix& projected = lc.projected[h];
      const Matrix& alpha = lc.alpha[h];
      const Matrix& logits_pre = lc.logits_pre[h];

      const Matrix d_alpha = d_z * projected.transpose();
      Matrix d_proj = alpha.transpose() * d_z;
      Vector d_head = Vector::Zero(n);
      Vector d_dep = Vector::Zero(n);
      for (int i = 0; i < n; ++i) {
        auto nb = graph.neighbors(i);
        double weighted = 0.0;
        for (int j : nb) weighted += alpha(i, j) * d_alpha(i, j);
        for (int j : nb) {
          const double de = alpha(i, j) * (d_alpha(i, j) - weighted);
          const double dp = logits_pre(i, j) > 0.0 ? de : cfg_.leaky_slope * de;
          d_head(i) += dp;
          d_dep(j) += dp;
        }
      }
      const auto a_head = head.a->value.col(0).head(d);
      const auto a_dep = head.a->value.col(0).tail(d);
      d_proj.noalias() += d_head * a_head.transpose();
      d_proj.noalias() += d_dep * a_dep.transpose();
      head.a->grad.col(0).head(d) += projected.transpose() * d_head;
      head.a->grad.col(0).tail(d) += projected.transpose() * d_dep;
      head.w->grad.noalias() += d_proj.transpose() * lc.input;
      d_in.noalias() += d_proj * head.w->value;
    }
    d_g = std::move(d_in);
  }
  if (projection_) return projection_->backward(cache.states, d_g);
  return d_g;
}

GatParams Gat::export_params() const {
  GatParams out;
  if (projection_) {
    out.input_weight = projection_->weight();
    out.input_bias = projection_->bias();
  }
  for (const auto& layer : heads_) {
    GatLayerParams lp;
    for (const HeadRef& h : layer) lp.heads.push_back({h.w->value, h.a->value.col(0)});
    out.layers.push_back(std::move(lp));
  }
  return out;
}

}  // namespace topseg
