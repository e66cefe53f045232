#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topseg/discourse_graph.hpp"
#include "topseg/layers.hpp"
#include "topseg/params.hpp"

namespace topseg {

struct GatConfig {
  int num_layers = 2;
  int num_heads = 4;
  int dim = 256;
  double leaky_slope = 0.2;
  // Inverted dropout on the head-averaged aggregate, training only.
  double dropout = 0.0;
};

void validate_gat_config(const GatConfig& cfg);

struct GatHead {
  Matrix w;  // dim x dim_in
  Vector a;  // 2 * dim
};

struct GatLayerParams {
  std::vector<GatHead> heads;
};

// e[i][j] = LeakyReLU(a . [W g_i || W g_j]) for j in N_i. Entries outside
// the neighbourhood are left at 0 and never read.
Matrix attention_logits(const Matrix& g, const GatHead& head,
                        const DiscourseGraph& graph, double leaky_slope);

// Row softmax restricted to N_i; exact zeros elsewhere.
Matrix attention_coeffs(const Matrix& logits, const DiscourseGraph& graph);

// z_i = sum_{j in N_i} alpha_ij W g_j.
Matrix aggregate(const Matrix& alpha, const Matrix& g, const Matrix& w);

// ELU(g + mean over heads of z).
Matrix layer_forward(const Matrix& g, const GatLayerParams& params,
                     const DiscourseGraph& graph, const GatConfig& cfg);

struct GatParams {
  // Present when the incoming state width differs from cfg.dim.
  std::optional<Matrix> input_weight;  // dim x in
  std::optional<Vector> input_bias;    // dim
  std::vector<GatLayerParams> layers;
};

Matrix gat_forward(const Matrix& states, const DiscourseGraph& graph,
                   const GatParams& params, const GatConfig& cfg);

double elu(double x);

struct GatLayerCache {
  Matrix input;                  // n x d
  std::vector<Matrix> projected;  // per head, n x d
  std::vector<Matrix> logits_pre;  // per head, pre-activation s1_i + s2_j
  std::vector<Matrix> alpha;      // per head
  Matrix pre;                    // g + zbar
  Matrix dropout_mask;           // empty when unused
};

struct GatCache {
  Matrix states;
  std::vector<GatLayerCache> layers;
};

// Trainable GAT stack bound to a ParamSet.
class Gat {
 public:
  Gat() = default;
  Gat(ParamSet& params, const GatConfig& cfg, int input_dim);

  const GatConfig& config() const { return cfg_; }
  bool has_projection() const { return projection_.has_value(); }

  // rng_seed is only consulted when training with dropout.
  Matrix forward(const Matrix& states, const DiscourseGraph& graph,
                 GatCache* cache = nullptr, bool training = false,
                 std::uint64_t rng_seed = 0) const;
  Matrix backward(const GatCache& cache, const DiscourseGraph& graph,
                  const Matrix& d_out) const;

  // Value copy of the bound parameters in the free-function layout.
  GatParams export_params() const;

 private:
  struct HeadRef {
    Param* w = nullptr;
    Param* a = nullptr;
  };
  GatConfig cfg_;
  std::optional<Linear> projection_;
  std::vector<std::vector<HeadRef>> heads_;
};

}  // namespace topseg
