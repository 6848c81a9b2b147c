#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sval/tensor.hpp"

namespace sval {

struct AdamConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers for one parameter.
struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
};

/// One bias-corrected Adam update of `param` in place. `step` is the
/// 1-based update count. Moments are lazily sized on first use.
void adam_update(std::span<double> param, std::span<const double> grad,
                 AdamMoments& moments, std::int64_t step,
                 const AdamConfig& config);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  /// Applies one update using each parameter's accumulated gradient.
  /// Parameters without a gradient buffer are treated as having zero grad.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t step) { step_ = step; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  std::vector<AdamMoments>& moments() { return moments_; }
  const std::vector<AdamMoments>& moments() const { return moments_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamMoments> moments_;
  AdamConfig config_;
  std::int64_t step_ = 0;
};

}  // namespace sval
