#include "demotion/sde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace demotion {

void SigmaSchedule::validate() const {
  require(n_steps >= 2, "sigma schedule needs at least two steps");
  require(std::isfinite(sigma_min) && sigma_min > 0.0, "sigma_min must be positive");
  require(std::isfinite(sigma_max) && sigma_max > sigma_min,
          "sigma_max must exceed sigma_min");
}

double sigma_at(const SigmaSchedule& s, int i) {
  s.validate();
  if (i < 0 || i > s.n_steps)
    throw std::out_of_range("sigma index " + std::to_string(i) + " outside [0, " +
                            std::to_string(s.n_steps) + "]");
  if (i == 0) return 0.0;
  // Pin the endpoints so they survive floating-point exponentiation exactly.
  if (i == 1) return s.sigma_min;
  if (i == s.n_steps) return s.sigma_max;
  const double t = static_cast<double>(i - 1) / static_cast<double>(s.n_steps - 1);
  return s.sigma_min * std::pow(s.sigma_max / s.sigma_min, t);
}

ComplexImage perturb(const ComplexImage& x0, double sigma, const ComplexImage& z) {
  require_same_shape(x0, z, "perturb");
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be finite and non-negative");
  return x0 + sigma * z;
}

double dsm_loss(const ComplexImage& score, const ComplexImage& x_t,
                const ComplexImage& x0, double sigma) {
  require_same_shape(score, x_t, "dsm_loss");
  require_same_shape(score, x0, "dsm_loss");
  require(std::isfinite(sigma) && sigma > 0.0, "dsm_loss needs sigma > 0");
  const ComplexImage residual = sigma * score + (x_t - x0) / sigma;
  return residual.abs2().sum() / static_cast<double>(residual.size());
}

}  // namespace demotion
