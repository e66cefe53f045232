#pragma once

#include <span>
#include <string>

#include "topseg/params.hpp"

namespace topseg {

// Building blocks with explicit forward caches and backward passes. Each
// layer holds pointers into a ParamSet it does not own; backward
// accumulates into Param::grad.

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParamSet& params, const std::string& name, int vocab, int dim);

  Matrix forward(std::span<const int> ids) const;
  void backward(std::span<const int> ids, const Matrix& d_out) const;
  int dim() const { return static_cast<int>(table_->value.cols()); }

 private:
  Param* table_ = nullptr;
};

// y = x W^T + b, rows are items.
class Linear {
 public:
  Linear() = default;
  Linear(ParamSet& params, const std::string& prefix, int in, int out);

  Matrix forward(const Matrix& x) const;
  Matrix backward(const Matrix& x, const Matrix& d_out) const;
  int in_dim() const { return static_cast<int>(weight_->value.cols()); }
  int out_dim() const { return static_cast<int>(weight_->value.rows()); }
  const Matrix& weight() const { return weight_->value; }
  Vector bias() const { return bias_->value.col(0); }

 private:
  Param* weight_ = nullptr;
  Param* bias_ = nullptr;
};

struct LstmCache {
  Matrix x;      // T x in
  Matrix gates;  // T x 4H, post-activation, order i f g o
  Matrix c;      // T x H
  Matrix h;      // T x H, row t belongs to input row t
  bool reverse = false;
};

class Lstm {
 public:
  Lstm() = default;
  Lstm(ParamSet& params, const std::string& prefix, int in, int hidden);

  LstmCache forward(const Matrix& x, bool reverse) const;
  Matrix backward(const LstmCache& cache, const Matrix& d_h) const;
  int hidden() const { return hidden_; }

 private:
  Param* wx_ = nullptr;
  Param* wh_ = nullptr;
  Param* b_ = nullptr;
  int hidden_ = 0;
};

struct BiLstmCache {
  LstmCache fwd;
  LstmCache bwd;
};

// Output row t is [forward_t ; backward_t].
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParamSet& params, const std::string& prefix, int in, int hidden);

  Matrix forward(const Matrix& x, BiLstmCache* cache) const;
  Matrix backward(const BiLstmCache& cache, const Matrix& d_out) const;
  int out_dim() const { return 2 * fwd_.hidden(); }

 private:
  Lstm fwd_;
  Lstm bwd_;
};

struct AttentionPoolCache {
  Matrix states;   // T x D
  Matrix u;        // T x A, tanh projections
  Vector weights;  // T
};

// Additive self-attention pooling: score_t = v . tanh(W s_t + b).
class AttentionPool {
 public:
  AttentionPool() = default;
  AttentionPool(ParamSet& params, const std::string& prefix, int dim,
                int attn_dim);

  Vector forward(const Matrix& states, AttentionPoolCache* cache) const;
  Matrix backward(const AttentionPoolCache& cache, const Vector& d_out) const;

 private:
  Param* w_ = nullptr;
  Param* b_ = nullptr;
  Param* v_ = nullptr;
};

struct MlpCache {
  Matrix x;
  Matrix hidden_pre;
};

// Two-layer feed-forward with ReLU; returns logits.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamSet& params, const std::string& prefix, int in, int hidden,
      int out);

  Matrix forward(const Matrix& x, MlpCache* cache) const;
  Matrix backward(const MlpCache& cache, const Matrix& d_logits) const;

 private:
  Linear first_;
  Linear second_;
};

// Row-wise softmax over a vector, max-shifted.
Vector softmax(const Vector& scores);

}  // namespace topseg
