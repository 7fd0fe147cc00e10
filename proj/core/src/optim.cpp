#include "rrl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rrl {

Adam::Adam(std::vector<ad::Var> params, const OptimizerConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (cfg_.name != "adam") {
    throw std::invalid_argument("unsupported optimizer: '" + cfg_.name + "'");
  }
  if (cfg_.learning_rate <= 0.0) {
    throw std::invalid_argument("learning rate must be positive");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(ad::Mat::Zero(p.rows(), p.cols()));
    v_.emplace_back(ad::Mat::Zero(p.rows(), p.cols()));
  }
}

double Adam::step() {
  ++t_;
  double sq_norm = 0.0;
  for (auto& p : params_) sq_norm += p.grad().squaredNorm();
  const double norm = std::sqrt(sq_norm);
  const double clip_scale =
      (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm
                                                      : 1.0;
  const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const ad::Mat g = params_[i].grad() * clip_scale;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const ad::Mat m_hat = m_[i] / bias1;
    const ad::Mat v_hat = v_[i] / bias2;
    params_[i].mutable_value().array() -=
        cfg_.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
  }
  zero_grad();
  return norm;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace rrl
