#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <Eigen/Dense>

namespace topseg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Param {
  Matrix value;
  Matrix grad;
};

// Named trainable tensors. Iteration is in name order, which fixes the order
// of initialization, optimizer updates and checkpoint layout. Element
// addresses are stable across insertions and moves.
class ParamSet {
 public:
  using Map = std::map<std::string, Param>;

  Param& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const {
    return params_.count(name) != 0;
  }

  void init_uniform(double scale, std::uint64_t seed);
  void zero_grad();
  void scale_grad(double factor);
  double grad_norm() const;
  std::size_t scalar_count() const;
  std::size_t tensor_count() const { return params_.size(); }

  // Value-only copy used for best-epoch snapshots.
  std::map<std::string, Matrix> snapshot() const;
  void restore(const std::map<std::string, Matrix>& snap);

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

 private:
  Map params_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(ParamSet& params);
  std::int64_t steps() const { return t_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace topseg
