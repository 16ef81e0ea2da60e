#pragma once

#include "demotion/types.hpp"

namespace demotion {

// Geometric noise ladder of the variance-exploding SDE discretization.
// sigma_i = sigma_min * (sigma_max / sigma_min)^((i - 1) / (n - 1)) for
// i in [1, n]; sigma_0 == 0 by convention so the final reverse step
// consumes the residual noise.
struct SigmaSchedule {
  int n_steps = 1000;
  double sigma_min = 0.01;
  double sigma_max = 50.0;

  void validate() const;
};

double sigma_at(const SigmaSchedule& s, int i);

// One-step forward perturbation x0 + sigma * z.
ComplexImage perturb(const ComplexImage& x0, double sigma, const ComplexImage& z);

// Denoising score-matching residual, mean over pixels of
// |sigma * score + (x_t - x0) / sigma|^2. Zero exactly when the score
// equals -(x_t - x0) / sigma^2.
double dsm_loss(const ComplexImage& score, const ComplexImage& x_t,
                const ComplexImage& x0, double sigma);

}  // namespace demotion
