#include "demotion/sampler.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

namespace demotion {

void SamplerConfig::validate() const {
  schedule.validate();
  require(n_prime >= 1 && n_prime <= schedule.n_steps,
          "n_prime must lie in [1, schedule length]");
  require(m_repeats >= 0, "m_repeats must be >= 0");
  require(lambda_n_prime >= 0.0 && lambda_n_prime <= 1.0,
          "lambda_n_prime must lie in [0, 1]");
  require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0, 1]");
  require(std::isfinite(r_snr) && r_snr >= 0.0, "r_snr must be >= 0");
}

double lambda_schedule(int i, const SamplerConfig& cfg) {
  cfg.validate();
  if (i < 1 || i > cfg.n_prime)
    throw std::out_of_range("lambda index " + std::to_string(i) + " outside [1, " +
                            std::to_string(cfg.n_prime) + "]");
  if (cfg.n_prime == 1) return 0.0;
  return cfg.lambda_n_prime * static_cast<double>(i - 1) /
         static_cast<double>(cfg.n_prime - 1);
}

ComplexImage ccdf_forward(const ComplexImage& x0, const SamplerConfig& cfg,
                          const ComplexImage& z) {
  cfg.validate();
  require_same_shape(x0, z, "ccdf_forward");
  return x0 + sigma_at(cfg.schedule, cfg.n_prime) * z;
}

namespace {

ScoreFn wrap(ScoreModel& model) {
  return [&model](const ComplexImage& x, double sigma) { return model.evaluate(x, sigma); };
}

}  // namespace

ComplexImage predictor_step(const ComplexImage& x_i, int i, const ScoreFn& score_fn,
                            const SamplerConfig& cfg, const ComplexImage& z) {
  cfg.validate();
  if (i < 1 || i > cfg.n_prime)
    throw std::out_of_range("predictor index outside [1, N']");
  require_same_shape(x_i, z, "predictor_step");
  const double s_i = sigma_at(cfg.schedule, i);
  const double s_prev = sigma_at(cfg.schedule, i - 1);
  const double step = s_i * s_i - s_prev * s_prev;
  const ComplexImage score = score_fn(x_i, s_i);
  require_same_shape(x_i, score, "predictor score");
  return x_i + step * score + std::sqrt(step) * z;
}

ComplexImage predictor_step(const ComplexImage& x_i, int i, ScoreModel& model,
                            const SamplerConfig& cfg, const ComplexImage& z) {
  return predictor_step(x_i, i, wrap(model), cfg, z);
}

double corrector_step_size(const ComplexImage& score, const ComplexImage& z,
                           double r_snr) {
  require(std::isfinite(r_snr) && r_snr >= 0.0, "r_snr must be >= 0");
  require_same_shape(score, z, "corrector_step_size");
  const double score_norm = l2_norm(score);
  if (score_norm == 0.0) {
    std::cerr << "warning: zero score norm, corrector step size set to 0\n";
    return 0.0;
  }
  const double ratio = r_snr * l2_norm(z) / score_norm;
  return 2.0 * ratio * ratio;
}

ComplexImage corrector_step(const ComplexImage& x, int i, const ScoreFn& score_fn,
                            const SamplerConfig& cfg, const ComplexImage& z,
                            const ComplexImage* previous) {
  cfg.validate();
  if (i < 1 || i > cfg.n_prime)
    throw std::out_of_range("corrector index outside [1, N']");
  require_same_shape(x, z, "corrector_step");
  const double s_i = sigma_at(cfg.schedule, i);
  const ComplexImage& eval_at =
      (cfg.corrector_input == CorrectorInput::previous && previous != nullptr) ? *previous
                                                                               : x;
  const ComplexImage score = score_fn(eval_at, s_i);
  require_same_shape(x, score, "corrector score");
  const double eps = corrector_step_size(score, z, cfg.r_snr);
  return x + eps * score + std::sqrt(2.0 * eps) * z;
}

ComplexImage corrector_step(const ComplexImage& x, int i, ScoreModel& model,
                            const SamplerConfig& cfg, const ComplexImage& z,
                            const ComplexImage* previous) {
  return corrector_step(x, i, wrap(model), cfg, z, previous);
}

ReconstructionResult reconstruct(const ComplexImage& x0, const KSpace& y,
                                 const ScoreFn& score_fn, const SamplerConfig& cfg) {
  cfg.validate();
  require_same_shape(x0, y, "reconstruct");
  require(all_finite(x0) && all_finite(y), "reconstruct inputs must be finite");

  ReconstructionResult result;
  result.config = cfg;
  if (cfg.m_repeats == 0) {
    result.output = x0;
    return result;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const LowFreqMask mask =
      make_lowfreq_mask(x0.rows(), x0.cols(), cfg.rho, cfg.axis);

  double scale = 1.0;
  if (cfg.normalize) {
    const double peak = magnitude(x0).maxCoeff();
    if (peak > 0.0) scale = peak;
  }
  result.norm_scale = scale;
  const ComplexImage x_work = x0 / scale;
  const KSpace y_work = y / scale;

  Rng rng(cfg.seed);
  ComplexImage x = x_work;
  for (int j = 1; j <= cfg.m_repeats; ++j) {
    ComplexImage z = rng.complex_normal_field(x.rows(), x.cols());
    x = ccdf_forward(x, cfg, z);
    for (int i = cfg.n_prime; i >= 1; --i) {
      const ComplexImage x_prev = x;
      const double lambda = lambda_schedule(i, cfg);

      const auto check_finite = [&](const ComplexImage& state) {
        if (!all_finite(state))
          throw std::runtime_error("non-finite state at repeat " + std::to_string(j) +
                                   ", step " + std::to_string(i));
      };

      z = rng.complex_normal_field(x.rows(), x.cols());
      x = predictor_step(x, i, score_fn, cfg, z);
      result.counters.predictor_evals += 2;
      check_finite(x);
      x = data_consistency(x, y_work, mask, lambda);
      result.counters.dc_applications += 2;

      z = rng.complex_normal_field(x.rows(), x.cols());
      x = corrector_step(x, i, score_fn, cfg, z, &x_prev);
      result.counters.corrector_evals += 2;
      check_finite(x);
      x = data_consistency(x, y_work, mask, lambda);
      result.counters.dc_applications += 2;
    }
    if (cfg.keep_snapshots) result.snapshots.push_back(x * scale);
  }

  result.output = x * scale;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

ReconstructionResult reconstruct(const ComplexImage& x0, const KSpace& y,
                                 ScoreModel& model, const SamplerConfig& cfg) {
  return reconstruct(x0, y, wrap(model), cfg);
}

}  // namespace demotion
