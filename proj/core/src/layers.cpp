#include "topseg/layers.hpp"

#include <cmath>

namespace topseg {
namespace {

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) {
  return 1.0 / (1.0 + (-x).exp());
}

}  // namespace

Vector softmax(const Vector& scores) {
  Vector out = (scores.array() - scores.maxCoeff()).exp().matrix();
  return out / out.sum();
}

Embedding::Embedding(ParamSet& params, const std::string& name, int vocab,
                     int dim)
    : table_(&params.add(name, vocab, dim)) {}

Matrix Embedding::forward(std::span<const int> ids) const {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table_->value.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    out.row(static_cast<Eigen::Index>(t)) = table_->value.row(ids[t]);
  }
  return out;
}

void Embedding::backward(std::span<const int> ids, const Matrix& d_out) const {
  for (std::size_t t = 0; t < ids.size(); ++t) {
    table_->grad.row(ids[t]) += d_out.row(static_cast<Eigen::Index>(t));
  }
}

Linear::Linear(ParamSet& params, const std::string& prefix, int in, int out)
    : weight_(&params.add(prefix + ".weight", out, in)),
      bias_(&params.add(prefix + ".bias", out, 1)) {}

Matrix Linear::forward(const Matrix& x) const {
  Matrix y = x * weight_->value.transpose();
  y.rowwise() += bias_->value.col(0).transpose();
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& d_out) const {
  weight_->grad.noalias() += d_out.transpose() * x;
  bias_->grad.col(0) += d_out.colwise().sum().transpose();
  return d_out * weight_->value;
}

Lstm::Lstm(ParamSet& params, const std::string& prefix, int in, int hidden)
    : wx_(&params.add(prefix + ".wx", 4 * hidden, in)),
      wh_(&params.add(prefix + ".wh", 4 * hidden, hidden)),
      b_(&params.add(prefix + ".b", 4 * hidden, 1)),
      hidden_(hidden) {}

LstmCache Lstm::forward(const Matrix& x, bool reverse) const {
  const Eigen::Index steps = x.rows();
  const Eigen::Index h = hidden_;
  LstmCache cache;
  cache.x = x;
  cache.reverse = reverse;
  cache.gates.resize(steps, 4 * h);
  cache.c.resize(steps, h);
  cache.h.resize(steps, h);

  Matrix pre = x * wx_->value.transpose();
  pre.rowwise() += b_->value.col(0).transpose();

  Vector h_prev = Vector::Zero(h);
  Vector c_prev = Vector::Zero(h);
  Vector a(4 * h);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index t = reverse ? steps - 1 - s : s;
    a.noalias() = wh_->value * h_prev;
    a += pre.row(t).transpose();
    const Eigen::ArrayXd i = sigmoid(a.segment(0, h).array());
    const Eigen::ArrayXd f = sigmoid(a.segment(h, h).array());
    const Eigen::ArrayXd g = a.segment(2 * h, h).array().tanh();
    const Eigen::ArrayXd o = sigmoid(a.segment(3 * h, h).array());
    const Eigen::ArrayXd c = f * c_prev.array() + i * g;
    const Eigen::ArrayXd hv = o * c.tanh();
    cache.gates.row(t) << i.transpose(), f.transpose(), g.transpose(), o.transpose();
    cache.c.row(t) = c.transpose();
    cache.h.row(t) = hv.transpose();
    h_prev = hv.matrix();
    c_prev = c.matrix();
  }
  return cache;
}

Matrix Lstm::backward(const LstmCache& cache, const Matrix& d_h) const {
  const Eigen::Index steps = cache.x.rows();
  const Eigen::Index h = hidden_;
  Matrix d_pre(steps, 4 * h);
  Eigen::ArrayXd dh_next = Eigen::ArrayXd::Zero(h);
  Eigen::ArrayXd dc_next = Eigen::ArrayXd::Zero(h);
  Vector da(4 * h);

  for (Eigen::Index s = steps - 1; s >= 0; --s) {
    const Eigen::Index t = cache.reverse ? steps - 1 - s : s;
    const bool has_prev = s > 0;
    const Eigen::Index tp = cache.reverse ? t + 1 : t - 1;

    const Eigen::ArrayXd i = cache.gates.row(t).segment(0, h).transpose().array();
    const Eigen::ArrayXd f = cache.gates.row(t).segment(h, h).transpose().array();
    const Eigen::ArrayXd g = cache.gates.row(t).segment(2 * h, h).transpose().array();
    const Eigen::ArrayXd o = cache.gates.row(t).segment(3 * h, h).transpose().array();
    const Eigen::ArrayXd c = cache.c.row(t).transpose().array();
    const Eigen::ArrayXd c_prev =
        has_prev ? Eigen::ArrayXd(cache.c.row(tp).transpose().array())
                 : Eigen::ArrayXd::Zero(h);

    const Eigen::ArrayXd dh = d_h.row(t).transpose().array() + dh_next;
    const Eigen::ArrayXd tc = c.tanh();
    const Eigen::ArrayXd d_o = dh * tc;
    const Eigen::ArrayXd dc = dc_next + dh * o * (1.0 - tc.square());
    const Eigen::ArrayXd d_i = dc * g;
    const Eigen::ArrayXd d_g = dc * i;
    const Eigen::ArrayXd d_f = dc * c_prev;
    dc_next = dc * f;

    da.segment(0, h) = (d_i * i * (1.0 - i)).matrix();
    da.segment(h, h) = (d_f * f * (1.0 - f)).matrix();
    da.segment(2 * h, h) = (d_g * (1.0 - g.square())).matrix();
    da.segment(3 * h, h) = (d_o * o * (1.0 - o)).matrix();
    d_pre.row(t) = da.transpose();

    if (has_prev) {
      wh_->grad.noalias() += da * cache.h.row(tp);
      dh_next = (wh_->value.transpose() * da).array();
    } else {
      dh_next.setZero();
    }
  }
  wx_->grad.noalias() += d_pre.transpose() * cache.x;
  b_->grad.col(0) += d_pre.colwise().sum().transpose();
  return d_pre * wx_->value;
}

BiLstm::BiLstm(ParamSet& params, const std::string& prefix, int in, int hidden)
    : fwd_(params, prefix + ".fwd", in, hidden),
      bwd_(params, prefix + ".bwd", in, hidden) {}

Matrix BiLstm::forward(const Matrix& x, BiLstmCache* cache) const {
  LstmCache f = fwd_.forward(x, false);
  LstmCache b = bwd_.forward(x, true);
  Matrix out(x.rows(), out_dim());
  out << f.h, b.h;
  if (cache) {
    cache->fwd = std::move(f);
    cache->bwd = std::move(b);
  }
  return out;
}

Matrix BiLstm::backward(const BiLstmCache& cache, const Matrix& d_out) const {
  const Eigen::Index h = fwd_.hidden();
  Matrix dx = fwd_.backward(cache.fwd, d_out.leftCols(h));
  dx += bwd_.backward(cache.bwd, d_out.rightCols(h));
  return dx;
}

AttentionPool::AttentionPool(ParamSet& params, const std::string& prefix,
                             int dim, int attn_dim)
    : w_(&params.add(prefix + ".w", attn_dim, dim)),
      b_(&params.add(prefix + ".b", attn_dim, 1)),
      v_(&params.add(prefix + ".v", attn_dim, 1)) {}

Vector AttentionPool::forward(const Matrix& states,
                              AttentionPoolCache* cache) const {
  Matrix u = states * w_->value.transpose();
  u.rowwise() += b_->value.col(0).transpose();
  u = u.array().tanh().matrix();
  const Vector weights = softmax(u * v_->value.col(0));
  Vector pooled = states.transpose() * weights;
  if (cache) {
    cache->states = states;
    cache->u = std::move(u);
    cache->weights = weights;
  }
  return pooled;
}

Matrix AttentionPool::backward(const AttentionPoolCache& cache,
                               const Vector& d_out) const {
  const Vector& alpha = cache.weights;
  Matrix d_states = alpha * d_out.transpose();
  const Vector d_alpha = cache.states * d_out;
  const Vector d_scores =
      alpha.cwiseProduct(d_alpha - Vector::Constant(alpha.size(), alpha.dot(d_alpha)));
  v_->grad.col(0) += cache.u.transpose() * d_scores;
  const Matrix d_pre = (d_scores * v_->value.col(0).transpose())
                           .cwiseProduct((1.0 - cache.u.array().square()).matrix());
  w_->grad.noalias() += d_pre.transpose() * cache.states;
  b_->grad.col(0) += d_pre.colwise().sum().transpose();
  d_states.noalias() += d_pre * w_->value;
  return d_states;
}

Mlp::Mlp(ParamSet& params, const std::string& prefix, int in, int hidden,
         int out)
    : first_(params, prefix + ".fc1", in, hidden),
      second_(params, prefix + ".fc2", hidden, out) {}

Matrix Mlp::forward(const Matrix& x, MlpCache* cache) const {
  Matrix pre = first_.forward(x);
  Matrix logits = second_.forward(pre.cwiseMax(0.0));
  if (cache) {
    cache->x = x;
    cache->hidden_pre = std::move(pre);
  }
  return logits;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& d_logits) const {
  const Matrix act = cache.hidden_pre.cwiseMax(0.0);
  Matrix d_act = second_.backward(act, d_logits);
  d_act = d_act.cwiseProduct(
      (cache.hidden_pre.array() > 0.0).cast<double>().matrix());
  return first_.backward(cache.x, d_act);
}

}  // namespace topseg
