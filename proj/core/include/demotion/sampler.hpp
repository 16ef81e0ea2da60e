#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "demotion/kspace.hpp"
#include "demotion/score.hpp"
#include "demotion/sde.hpp"
#include "demotion/types.hpp"

namespace demotion {

// Any score estimate s(x, sigma); the trained model is one instance,
// analytic scores another (used by the stationarity tests).
using ScoreFn = std::function<ComplexImage(const ComplexImage&, double)>;

// Which iterate the corrector's score is evaluated at: the post-consistency
// state (current) or the pre-predictor state x_i (previous, the literal
// algorithm text).
enum class CorrectorInput { current, previous };

struct SamplerConfig {
  int n_prime = 10;      // reverse steps per repeat; sigma list = lowest
                         // n_prime entries of the full schedule
  int m_repeats = 3;     // outer forward/reverse repeats
  double lambda_n_prime = 0.01;
  double rho = 0.1;      // retained central phase-encode fraction
  double r_snr = 0.16;   // corrector signal-to-noise ratio
  SigmaSchedule schedule;
  std::uint64_t seed = 0;
  CorrectorInput corrector_input = CorrectorInput::current;
  PhaseAxis axis = PhaseAxis::cols;
  bool normalize = true;        // work on x0 / max|x0|, undo at the end
  bool keep_snapshots = false;  // record the state after each repeat

  void validate() const;
};

// Operation counts at real-plane granularity: one complex-valued model
// evaluation or consistency application touches two planes and counts 2.
struct StepCounters {
  long predictor_evals = 0;
  long corrector_evals = 0;
  long dc_applications = 0;
};

struct ReconstructionResult {
  ComplexImage output;
  std::vector<ComplexImage> snapshots;
  double wall_seconds = 0.0;
  SamplerConfig config;
  StepCounters counters;
  double norm_scale = 1.0;  // per-image normalizer shared between x0 and y
};

// lambda_i = lambda_N' (i - 1) / (N' - 1), zero at i = 1; N' = 1 gives 0.
double lambda_schedule(int i, const SamplerConfig& cfg);

// One-step forward diffusion to the truncated start level sigma_{N'}.
ComplexImage ccdf_forward(const ComplexImage& x0, const SamplerConfig& cfg,
                          const ComplexImage& z);

// x' = x_i + (sigma_i^2 - sigma_{i-1}^2) s(x_i, sigma_i), then noised by
// sqrt(sigma_i^2 - sigma_{i-1}^2) z. i = 1 uses sigma_0 = 0.
ComplexImage predictor_step(const ComplexImage& x_i, int i, const ScoreFn& score,
                            const SamplerConfig& cfg, const ComplexImage& z);
ComplexImage predictor_step(const ComplexImage& x_i, int i, ScoreModel& model,
                            const SamplerConfig& cfg, const ComplexImage& z);

// epsilon = 2 (r ||z|| / ||score||)^2; zero score gives zero with a warning.
double corrector_step_size(const ComplexImage& score, const ComplexImage& z,
                           double r_snr);

// x + eps_i s + sqrt(2 eps_i) z. The score argument follows
// cfg.corrector_input: `previous` evaluates at *previous when supplied,
// otherwise at x itself.
ComplexImage corrector_step(const ComplexImage& x, int i, const ScoreFn& score,
                            const SamplerConfig& cfg, const ComplexImage& z,
                            const ComplexImage* previous = nullptr);
ComplexImage corrector_step(const ComplexImage& x, int i, ScoreModel& model,
                            const SamplerConfig& cfg, const ComplexImage& z,
                            const ComplexImage* previous = nullptr);

// M repeats of {forward diffusion; for i = N'..1: predictor, consistency,
// corrector, consistency}; the output of repeat j seeds repeat j + 1.
ReconstructionResult reconstruct(const ComplexImage& x0, const KSpace& y,
                                 const ScoreFn& score, const SamplerConfig& cfg);
ReconstructionResult reconstruct(const ComplexImage& x0, const KSpace& y,
                                 ScoreModel& model, const SamplerConfig& cfg);

}  // namespace demotion
