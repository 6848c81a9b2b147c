#include "sval/optim.hpp"

#include <cmath>

namespace sval {

void adam_update(std::span<double> param, std::span<const double> grad,
                 AdamMoments& moments, std::int64_t step,
                 const AdamConfig& config) {
  if (param.size() != grad.size()) {
    throw DimensionError("adam: parameter has " + std::to_string(param.size()) +
                         " values but gradient has " +
                         std::to_string(grad.size()));
  }
  if (step < 1) throw ContractError("adam: step count starts at 1");
  if (moments.first.size() != param.size()) {
    moments.first.assign(param.size(), 0.0);
    moments.second.assign(param.size(), 0.0);
  }
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    double& m = moments.first[i];
    double& v = moments.second[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    param[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), moments_(params_.size()), config_(config) {}

void Adam::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (p.has_grad()) {
      adam_update(p.mutable_data(), p.grad(), moments_[i], step_, config_);
    } else {
      const std::vector<double> zero(p.numel(), 0.0);
      adam_update(p.mutable_data(), zero, moments_[i], step_, config_);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace sval
