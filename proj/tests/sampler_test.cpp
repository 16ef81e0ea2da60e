#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "demotion/harness/dataset.hpp"
#include "demotion/kspace.hpp"
#include "demotion/rng.hpp"
#include "demotion/sampler.hpp"

using namespace demotion;

namespace {

const ScoreFn kZeroScore = [](const ComplexImage& x, double) {
  return ComplexImage(ComplexImage::Zero(x.rows(), x.cols()));
};

// crude but well-behaved score stand-in for plumbing tests
const ScoreFn kShrinkScore = [](const ComplexImage& x, double sigma) {
  return ComplexImage(-x / (1.0 + sigma * sigma));
};

ComplexImage phantom16(std::uint64_t seed) {
  Rng rng(seed);
  return to_complex(make_phantom(16, rng));
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("lambda schedule anchors and interior values") {
  SamplerConfig cfg;  // n_prime = 10, lambda_n_prime = 0.01
  CHECK(lambda_schedule(1, cfg) == 0.0);
  CHECK(lambda_schedule(10, cfg) == 0.01);
  CHECK(std::abs(lambda_schedule(5, cfg) - 0.01 * 4.0 / 9.0) <= 1e-15);

  SamplerConfig one = cfg;
  one.n_prime = 1;
  CHECK(lambda_schedule(1, one) == 0.0);

  CHECK_THROWS_AS(lambda_schedule(0, cfg), std::out_of_range);
  CHECK_THROWS_AS(lambda_schedule(11, cfg), std::out_of_range);
}

TEST_CASE("config validation") {
  SamplerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_prime = 1001;  // beyond the schedule
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SamplerConfig{};
  cfg.m_repeats = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SamplerConfig{};
  cfg.rho = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SamplerConfig{};
  cfg.lambda_n_prime = -0.2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("forward diffusion jumps to the truncated start level") {
  SamplerConfig cfg;
  const double sigma10 = 0.01 * std::pow(5000.0, 9.0 / 999.0);
  CHECK(std::abs(sigma_at(cfg.schedule, cfg.n_prime) - sigma10) <= 1e-12);

  const ComplexImage x0 = phantom16(1);
  CHECK((ccdf_forward(x0, cfg, ComplexImage::Zero(16, 16)) == x0).all());

  const ComplexImage ones = ComplexImage::Constant(16, 16, 1.0);
  const ComplexImage up = ccdf_forward(x0, cfg, ones);
  CHECK((up - x0 - sigma10 * ones).abs().maxCoeff() <= 1e-15);

  SamplerConfig full = cfg;
  full.n_prime = 1000;
  const ComplexImage top = ccdf_forward(x0, full, ones);
  CHECK((top - x0 - 50.0 * ones).abs().maxCoeff() <= 1e-12);

  // empirical spread matches sigma_N'
  Rng rng(2);
  double acc = 0.0;
  long n = 0;
  for (int t = 0; t < 200; ++t) {
    const ComplexImage z = rng.complex_normal_field(16, 16);
    const ComplexImage xt = ccdf_forward(ComplexImage::Zero(16, 16), cfg, z);
    acc += xt.abs2().sum();
    n += xt.size();
  }
  CHECK(std::abs(std::sqrt(acc / n) - sigma10) <= 0.02 * sigma10);
}

TEST_CASE("corrector step size closed forms") {
  Rng rng(3);
  const ComplexImage z = rng.complex_normal_field(16, 16);
  CHECK(corrector_step_size(z, z, 0.16) == 2.0 * 0.16 * 0.16);
  CHECK(corrector_step_size(z, z, 0.0) == 0.0);
  CHECK(corrector_step_size(ComplexImage::Zero(16, 16), z, 0.16) == 0.0);

  const ComplexImage s = rng.complex_normal_field(16, 16);
  const double ratio = 0.16 * l2_norm(z) / l2_norm(s);
  CHECK(std::abs(corrector_step_size(s, z, 0.16) - 2.0 * ratio * ratio) <= 1e-12);
}

TEST_CASE("zero score and zero noise leave states untouched") {
  SamplerConfig cfg;
  const ComplexImage x = phantom16(4);
  const ComplexImage z0 = ComplexImage::Zero(16, 16);
  CHECK((predictor_step(x, 5, kZeroScore, cfg, z0) == x).all());
  CHECK((corrector_step(x, 5, kZeroScore, cfg, z0) == x).all());

  // i = 1 consumes the residual noise with sigma_0 = 0
  const ComplexImage ones = ComplexImage::Constant(16, 16, 1.0);
  const ComplexImage stepped = predictor_step(x, 1, kZeroScore, cfg, ones);
  CHECK((stepped - x - 0.01 * ones).abs().maxCoeff() <= 1e-15);

  CHECK_THROWS_AS(predictor_step(x, 0, kZeroScore, cfg, z0), std::out_of_range);
  CHECK_THROWS_AS(predictor_step(x, 11, kZeroScore, cfg, z0), std::out_of_range);
}

TEST_CASE("the corrector reads the configured iterate") {
  SamplerConfig cfg;
  ComplexImage seen;
  const ScoreFn probe = [&](const ComplexImage& x, double) {
    seen = x;
    return ComplexImage(ComplexImage::Zero(x.rows(), x.cols()));
  };
  const ComplexImage x = phantom16(5);
  const ComplexImage xp = phantom16(6);
  const ComplexImage z0 = ComplexImage::Zero(16, 16);

  corrector_step(x, 3, probe, cfg, z0, &xp);
  CHECK((seen == x).all());  // default: current iterate

  cfg.corrector_input = CorrectorInput::previous;
  corrector_step(x, 3, probe, cfg, z0, &xp);
  CHECK((seen == xp).all());
  corrector_step(x, 3, probe, cfg, z0, nullptr);  // nothing supplied: falls back
  CHECK((seen == x).all());
}

TEST_CASE("zero repeats return the input unchanged") {
  SamplerConfig cfg;
  cfg.m_repeats = 0;
  const ComplexImage x0 = phantom16(7);
  const KSpace y = fft2c(phantom16(8));
  const ReconstructionResult res = reconstruct(x0, y, kZeroScore, cfg);
  CHECK((res.output == x0).all());
  CHECK(res.counters.predictor_evals == 0);
  CHECK(res.counters.corrector_evals == 0);
  CHECK(res.counters.dc_applications == 0);
  CHECK(res.snapshots.empty());
}

TEST_CASE("step counters track real-plane work") {
  const ComplexImage x0 = phantom16(9);
  const KSpace y = fft2c(phantom16(10));

  SamplerConfig cfg;  // N' = 10, M = 3
  const ReconstructionResult res = reconstruct(x0, y, kShrinkScore, cfg);
  CHECK(res.counters.predictor_evals == 60);
  CHECK(res.counters.corrector_evals == 60);
  CHECK(res.counters.dc_applications == 120);

  SamplerConfig small;
  small.n_prime = 2;
  small.m_repeats = 1;
  const ReconstructionResult r2 = reconstruct(x0, y, kShrinkScore, small);
  CHECK(r2.counters.predictor_evals == 4);
  CHECK(r2.counters.corrector_evals == 4);
  CHECK(r2.counters.dc_applications == 8);
}

TEST_CASE("reconstruction is deterministic in the seed") {
  const ComplexImage x0 = phantom16(11);
  const KSpace y = fft2c(phantom16(12));
  SamplerConfig cfg;
  cfg.seed = 42;
  const ReconstructionResult a = reconstruct(x0, y, kShrinkScore, cfg);
  const ReconstructionResult b = reconstruct(x0, y, kShrinkScore, cfg);
  CHECK((a.output == b.output).all());

  cfg.seed = 43;
  const ReconstructionResult c = reconstruct(x0, y, kShrinkScore, cfg);
  CHECK(!(a.output == c.output).all());
}

TEST_CASE("the final state honors the measured band") {
  const ComplexImage clean = phantom16(13);
  const ComplexImage x0 = phantom16(14);
  const KSpace y = fft2c(clean);
  SamplerConfig cfg;
  const ReconstructionResult res = reconstruct(x0, y, kShrinkScore, cfg);

  const LowFreqMask mask = make_lowfreq_mask(16, 16, cfg.rho, cfg.axis);
  const KSpace err = apply_mask(mask, KSpace(fft2c(res.output) - y));
  const double ref = l2_norm(apply_mask(mask, y));
  CHECK(l2_norm(err) / ref <= 1e-5);
}

TEST_CASE("snapshots record each repeat") {
  const ComplexImage x0 = phantom16(15);
  const KSpace y = fft2c(phantom16(16));
  SamplerConfig cfg;
  cfg.m_repeats = 2;
  cfg.keep_snapshots = true;
  const ReconstructionResult res = reconstruct(x0, y, kShrinkScore, cfg);
  REQUIRE(res.snapshots.size() == 2);
  CHECK((res.snapshots[1] == res.output).all());
  CHECK(!(res.snapshots[0] == res.output).all());
  CHECK(res.norm_scale > 0.0);
}

TEST_CASE("normalization rescales without changing consistency") {
  Rng rng(17);
  const ComplexImage x0 = 4.0 * phantom16(18);
  const KSpace y = fft2c(ComplexImage(4.0 * phantom16(19)));
  SamplerConfig cfg;
  const ReconstructionResult res = reconstruct(x0, y, kShrinkScore, cfg);
  CHECK(res.norm_scale == magnitude(x0).maxCoeff());

  SamplerConfig raw = cfg;
  raw.normalize = false;
  const ReconstructionResult res2 = reconstruct(x0, y, kShrinkScore, raw);
  CHECK(res2.norm_scale == 1.0);
  CHECK(all_finite(res2.output));
}

TEST_CASE("a divergent score aborts with context") {
  const ScoreFn kaboom = [](const ComplexImage& x, double) {
    return ComplexImage(ComplexImage::Constant(
        x.rows(), x.cols(), Complex(std::numeric_limits<double>::quiet_NaN(), 0.0)));
  };
  const ComplexImage x0 = phantom16(20);
  const KSpace y = fft2c(x0);
  SamplerConfig cfg;
  try {
    reconstruct(x0, y, kaboom, cfg);
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("repeat") != std::string::npos);
  }
}

TEST_CASE("predictor contracts toward the data mean under the exact score") {
  // Gaussian data: mu constant, per-pixel complex variance s^2. At noise
  // level sigma the marginal score is -(x - mu) / (s^2 + sigma^2), and one
  // predictor step shrinks the expected squared distance to mu from
  // V = s^2 + sigma_i^2 to (1 - d/V)^2 V + d with d = sigma_i^2 - sigma_{i-1}^2.
  const double s2 = 0.25;
  const ComplexImage mu = ComplexImage::Constant(16, 16, 0.3);
  const ScoreFn oracle = [&](const ComplexImage& x, double sigma) {
    return ComplexImage(-(x - mu) / (s2 + sigma * sigma));
  };

  SamplerConfig cfg;
  cfg.n_prime = 1000;
  const int i = 1000;
  const double si = sigma_at(cfg.schedule, i);
  const double sm = sigma_at(cfg.schedule, i - 1);
  const double v = s2 + si * si;
  const double d = si * si - sm * sm;

  Rng rng(21);
  double before = 0.0, after = 0.0;
  const int draws = 1000;
  for (int t = 0; t < draws; ++t) {
    const ComplexImage xi = mu + std::sqrt(v) * rng.complex_normal_field(16, 16);
    const ComplexImage xo = predictor_step(xi, i, oracle, cfg, rng.complex_normal_field(16, 16));
    before += (xi - mu).abs2().mean();
    after += (xo - mu).abs2().mean();
  }
  before /= draws;
  after /= draws;

  CHECK(after < before);
  const double predicted = (1.0 - d / v) * (1.0 - d / v) * v + d;
  CHECK(std::abs(after - predicted) <= 0.03 * predicted);
  CHECK(std::abs(before - v) <= 0.03 * v);
}

TEST_CASE("repeated correction settles at the perturbed data mean") {
  const double s2 = 0.25;
  const ComplexImage mu = ComplexImage::Constant(16, 16, 1.0);
  const ScoreFn oracle = [&](const ComplexImage& x, double sigma) {
    return ComplexImage(-(x - mu) / (s2 + sigma * sigma));
  };

  SamplerConfig cfg;
  cfg.n_prime = 1000;
  const int i = 500;

  Rng rng(22);
  double grand = 0.0;
  const int chains = 30;
  const int steps = 300;
  for (int c = 0; c < chains; ++c) {
    ComplexImage x = mu + 2.0;  // start far off
    for (int t = 0; t < steps; ++t) {
      x = corrector_step(x, i, oracle, cfg, rng.complex_normal_field(16, 16));
    }
    grand += x.real().mean();
  }
  grand /= chains;
  CHECK(std::abs(grand - 1.0) <= 0.05);
}

}  // TEST_SUITE
