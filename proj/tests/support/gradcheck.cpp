#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace sval::testing {

double gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                 std::vector<Tensor> inputs, double step, std::size_t checked) {
  checked = std::min(checked, inputs.size());
  for (std::size_t k = 0; k < checked; ++k) {
    inputs[k].set_requires_grad(true);
    inputs[k].zero_grad();
  }
  f(inputs).backward();
  double worst = 0.0;
  for (std::size_t k = 0; k < checked; ++k) {
    Tensor& t = inputs[k];
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    std::vector<double> numeric(t.numel());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = f(inputs).item();
      values[i] = saved - step;
      const double down = f(inputs).item();
      values[i] = saved;
      numeric[i] = (up - down) / (2.0 * step);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = uniform(rng, lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

Tensor random_away_from_zero(Shape shape, Rng& rng, double margin) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) {
    const double mag = uniform(rng, margin, 1.0);
    x = bernoulli(rng, 0.5) ? mag : -mag;
  }
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace sval::testing
