#include <benchmark/benchmark.h>

#include "demotion/harness/dataset.hpp"
#include "demotion/kspace.hpp"
#include "demotion/motion.hpp"
#include "demotion/rng.hpp"
#include "demotion/sampler.hpp"
#include "demotion/score.hpp"

namespace {

using namespace demotion;

void BM_fft2c(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  Rng rng(1);
  const ComplexImage x = rng.complex_normal_field(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(fft2c(x));
}
BENCHMARK(BM_fft2c)->Arg(64)->Arg(256);

void BM_data_consistency(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  Rng rng(2);
  const ComplexImage x = rng.complex_normal_field(n, n);
  const KSpace y = fft2c(rng.complex_normal_field(n, n));
  const LowFreqMask mask = make_lowfreq_mask(n, n, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(data_consistency(x, y, mask, 0.01));
}
BENCHMARK(BM_data_consistency)->Arg(64)->Arg(256);

void BM_corrupt_rigid(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  Rng rng(3);
  const ComplexImage x = to_complex(make_phantom(n, rng));
  SimulationRanges ranges;
  ranges.pixel_spacing_cm = 0.35;
  const RigidMotionParams p = sample_rigid_params(ranges, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(corrupt_rigid(x, p));
}
BENCHMARK(BM_corrupt_rigid)->Arg(64)->Arg(256);

void BM_score_evaluate(benchmark::State& state) {
  ScoreModelConfig cfg;
  cfg.base_width = static_cast<int>(state.range(0));
  SigmaSchedule schedule;
  ScoreModel model(cfg, schedule);
  Rng rng(4);
  const ComplexImage x = rng.complex_normal_field(64, 64);
  for (auto _ : state) benchmark::DoNotOptimize(model.evaluate(x, 1.0));
}
BENCHMARK(BM_score_evaluate)->Arg(8)->Arg(12)->Arg(16);

// One predictor/consistency/corrector/consistency cycle, the sampler's
// innermost unit of work.
void BM_sampler_inner_step(benchmark::State& state) {
  ScoreModelConfig mcfg;
  mcfg.base_width = 8;
  SigmaSchedule schedule;
  ScoreModel model(mcfg, schedule);
  SamplerConfig cfg;
  cfg.schedule = schedule;
  Rng rng(5);
  const ComplexImage x0 = to_complex(make_phantom(64, rng));
  const KSpace y = fft2c(x0);
  const LowFreqMask mask = make_lowfreq_mask(64, 64, cfg.rho, cfg.axis);
  const ComplexImage z = rng.complex_normal_field(64, 64);
  ComplexImage x = ccdf_forward(x0, cfg, z);
  const int i = cfg.n_prime;
  const double lam = lambda_schedule(i, cfg);
  for (auto _ : state) {
    ComplexImage xp = predictor_step(x, i, model, cfg, z);
    xp = data_consistency(xp, y, mask, lam);
    ComplexImage xc = corrector_step(xp, i, model, cfg, z);
    benchmark::DoNotOptimize(data_consistency(xc, y, mask, lam));
  }
}
BENCHMARK(BM_sampler_inner_step);

}  // namespace

BENCHMARK_MAIN();
