#include "skh/optim.hpp"

#include <cmath>

namespace skh {

double clip_global_norm(ParamRegistry& params, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.at(i);
    p.ensure_grad();
    for (double g : p.grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (std::size_t i = 0; i < params.size(); ++i)
      for (double& g : params.at(i).grad) g *= s;
  }
  return norm;
}

void AdamW::step(ParamRegistry& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params.at(i).numel(), 0.0);
      v_[i].assign(params.at(i).numel(), 0.0);
    }
  }
  if (m_.size() != params.size())
    throw DimensionError("optimizer state holds " + std::to_string(m_.size()) +
                         " parameters, registry has " + std::to_string(params.size()));
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.at(i);
    p.ensure_grad();
    if (m_[i].size() != p.numel())
      throw DimensionError("optimizer state for " + params.names()[i] +
                           " does not match its tensor");
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const double g = p.grad[j];
      double& m = m_[i][j];
      double& v = v_[i][j];
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g * g;
      if (lr_ == 0.0) continue;  // a -0.0 update would flip signed zeros
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p.data[j] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p.data[j]);
    }
  }
}

}  // namespace skh
