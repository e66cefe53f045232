#include "topseg/params.hpp"

#include <cmath>
#include <random>

#include "topseg/error.hpp"

namespace topseg {

Param& ParamSet::add(const std::string& name, Eigen::Index rows,
                     Eigen::Index cols) {
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw Error("duplicate parameter '" + name + "'");
  it->second.value = Matrix::Zero(rows, cols);
  it->second.grad = Matrix::Zero(rows, cols);
  return it->second;
}

Param& ParamSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Param& ParamSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

void ParamSet::init_uniform(double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& [name, p] : params_) {
    for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) p.value(r, c) = dist(rng);
    }
  }
}

void ParamSet::zero_grad() {
  for (auto& [name, p] : params_) p.grad.setZero();
}

void ParamSet::scale_grad(double factor) {
  for (auto& [name, p] : params_) p.grad *= factor;
}

double ParamSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, p] : params_) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

std::size_t ParamSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [name, p] : params_) total += static_cast<std::size_t>(p.value.size());
  return total;
}

std::map<std::string, Matrix> ParamSet::snapshot() const {
  std::map<std::string, Matrix> out;
  for (const auto& [name, p] : params_) out.emplace(name, p.value);
  return out;
}

void ParamSet::restore(const std::map<std::string, Matrix>& snap) {
  for (auto& [name, p] : params_) {
    auto it = snap.find(name);
    if (it == snap.end() || it->second.rows() != p.value.rows() ||
        it->second.cols() != p.value.cols()) {
      throw Error("snapshot does not match parameter '" + name + "'");
    }
    p.value = it->second;
  }
}

void Adam::step(ParamSet& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto [it, fresh] = moments_.try_emplace(name);
    Moments& mo = it->second;
    if (fresh) {
      mo.m = Matrix::Zero(p.value.rows(), p.value.cols());
      mo.v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    mo.m = cfg_.beta1 * mo.m + (1.0 - cfg_.beta1) * p.grad;
    mo.v = cfg_.beta2 * mo.v + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= cfg_.lr * (mo.m.array() / bc1) /
                       ((mo.v.array() / bc2).sqrt() + cfg_.eps);
  }
}

}  // namespace topseg
