#include "racmc/optim.hpp"

#include <cmath>

namespace racmc {

void adam_step(Tensor& param, AdamState& state) {
  if (!param.has_grad())
    throw contract_error("adam_step: parameter has no gradient");
  const Matrix& g = param.grad();
  const AdamConfig& hp = state.hp;
  state.t += 1;
  state.m = hp.beta1 * state.m + (1.0 - hp.beta1) * g;
  state.v = hp.beta2 * state.v.array() + (1.0 - hp.beta2) * g.array().square();
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  Matrix m_hat = state.m / c1;
  Matrix v_hat = state.v / c2;
  param.mutable_value().array() -= hp.lr * m_hat.array() / (v_hat.array().sqrt() + hp.eps);
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)) {
  states_.reserve(params_.size());
  for (const Tensor& p : params_) states_.emplace_back(p.rows(), p.cols(), cfg);
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    adam_step(params_[i], states_[i]);
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace racmc
