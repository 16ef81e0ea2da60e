#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "demotion/harness/dataset.hpp"
#include "demotion/kspace.hpp"
#include "demotion/motion.hpp"
#include "demotion/rng.hpp"

using namespace demotion;

namespace {

double rel_err(const ComplexImage& a, const ComplexImage& b) {
  const double ref = l2_norm(b);
  return l2_norm(ComplexImage(a - b)) / (ref > 0 ? ref : 1.0);
}

RigidMotionParams still_params(Eigen::Index n, double k0 = 0.0) {
  RigidMotionParams p;
  p.alpha_deg = Eigen::ArrayXd::Zero(n);
  p.delta_y = Eigen::ArrayXd::Zero(n);
  p.delta_x = Eigen::ArrayXd::Zero(n);
  p.k0 = k0;
  return p;
}

// Circular shift by d along the column (phase-encode) axis.
ComplexImage circshift_cols(const ComplexImage& x, int d) {
  const Eigen::Index n = x.cols();
  ComplexImage out(x.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.col((j + d % n + n) % n) = x.col(j);
  }
  return out;
}

ComplexImage test_image(Eigen::Index size, std::uint64_t seed) {
  Rng rng(seed);
  return to_complex(make_phantom(size, rng));
}

}  // namespace

TEST_SUITE("motion") {

TEST_CASE("zero motion reproduces the input") {
  const ComplexImage x = test_image(32, 1);
  const CorruptionResult res = corrupt_rigid(x, still_params(32));
  CHECK(rel_err(res.image, x) <= 1e-10);
  CHECK(rel_err(res.kspace, fft2c(x)) <= 1e-12);
}

TEST_CASE("uniform integer shift matches a circular shift") {
  Rng rng(2);
  const ComplexImage x = rng.complex_normal_field(16, 16);
  const int d = 3;
  RigidMotionParams p = still_params(16);
  p.delta_y = Eigen::ArrayXd::Constant(16, static_cast<double>(d));
  // the k_y = 0 line carries no shift phase; zeroing it there keeps the
  // central band convention without changing the result
  p.delta_y(8) = 0.0;
  const CorruptionResult res = corrupt_rigid(x, p);
  CHECK(rel_err(res.image, circshift_cols(x, d)) <= 1e-6);
}

TEST_CASE("central band lines are bit-identical to the clean spectrum") {
  const ComplexImage x = test_image(32, 3);
  SimulationRanges ranges;
  ranges.pixel_spacing_cm = 0.35;
  Rng rng(4);
  const RigidMotionParams p = sample_rigid_params(ranges, 32, rng);
  const CorruptionResult res = corrupt_rigid(x, p);
  const KSpace base = fft2c(x);

  int clean_lines = 0;
  int changed_lines = 0;
  for (Eigen::Index j = 0; j < 32; ++j) {
    if (std::abs(freq_coord(j, 32)) <= p.k0) {
      ++clean_lines;
      CHECK((res.kspace.col(j) == base.col(j)).all());
    } else if (!(res.kspace.col(j) == base.col(j)).all()) {
      ++changed_lines;
    }
  }
  CHECK(clean_lines == 3);  // |2 pi (j - 16) / 32| <= pi/10
  CHECK(changed_lines > 0);
}

TEST_CASE("pure translation preserves per-line magnitudes") {
  const ComplexImage x = test_image(24, 5);
  SimulationRanges ranges;
  ranges.alpha_deg = {0.0, 0.0};
  ranges.pixel_spacing_cm = 0.35;
  Rng rng(6);
  const RigidMotionParams p = sample_rigid_params(ranges, 24, rng);
  const CorruptionResult res = corrupt_rigid(x, p);
  const KSpace base = fft2c(x);
  CHECK((res.kspace.abs() - base.abs()).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("rotation fixes the center and lands grid points at right angles") {
  ComplexImage x = ComplexImage::Zero(17, 17);
  x(8, 8) = 2.0;
  x(8, 10) = 1.0;
  const ComplexImage r = rotate_about_center(x, 90.0);
  CHECK(std::abs(r(8, 8) - Complex(2.0)) <= 1e-12);
  CHECK(std::abs(r(6, 8) - Complex(1.0)) <= 1e-12);  // counterclockwise, row 0 on top
  CHECK(std::abs(r(8, 10)) <= 1e-12);

  CHECK((rotate_about_center(x, 0.0) == x).all());
}

TEST_CASE("respiratory at delta 0 reproduces the input") {
  const ComplexImage x = test_image(32, 7);
  RespiratoryMotionParams p;
  p.delta = 0.0;
  p.m = 2.0;
  p.n = 0.3;
  p.k0 = 0.4;
  const CorruptionResult res = corrupt_respiratory(x, p);
  CHECK(rel_err(res.image, x) <= 1e-12);
}

TEST_CASE("respiratory with m 0 and n pi/2 is a pure translation") {
  Rng rng(8);
  const ComplexImage x = rng.complex_normal_field(16, 16);
  RespiratoryMotionParams p;
  p.delta = 3.0;
  p.m = 0.0;
  p.n = M_PI / 2.0;  // sin(n) = 1: shift by delta on every corrupted line
  p.k0 = 0.0;
  const CorruptionResult res = corrupt_respiratory(x, p);
  CHECK(rel_err(res.image, circshift_cols(x, 3)) <= 1e-6);

  RigidMotionParams q = still_params(16);
  q.delta_y = Eigen::ArrayXd::Constant(16, 3.0);
  q.delta_y(8) = 0.0;
  const CorruptionResult rig = corrupt_rigid(x, q);
  CHECK(rel_err(res.image, rig.image) <= 1e-12);
}

TEST_CASE("respiratory corruption stays outside the band") {
  const ComplexImage x = test_image(32, 9);
  SimulationRanges ranges;
  ranges.pixel_spacing_cm = 0.35;
  Rng rng(10);
  const RespiratoryMotionParams p = sample_respiratory_params(ranges, rng);
  const CorruptionResult res = corrupt_respiratory(x, p);
  const KSpace base = fft2c(x);
  int changed = 0;
  for (Eigen::Index j = 0; j < 32; ++j) {
    if (std::abs(freq_coord(j, 32)) <= p.k0) {
      CHECK((res.kspace.col(j) == base.col(j)).all());
    } else if (!(res.kspace.col(j) == base.col(j)).all()) {
      ++changed;
    }
  }
  CHECK(changed > 0);
  CHECK(rel_err(res.image, x) > 1e-4);  // the artifact is visible
}

TEST_CASE("parameter sampling is deterministic and respects ranges") {
  SimulationRanges ranges;
  ranges.pixel_spacing_cm = 0.35;
  Rng a(9), b(9);
  const RigidMotionParams p1 = sample_rigid_params(ranges, 64, a);
  const RigidMotionParams p2 = sample_rigid_params(ranges, 64, b);
  CHECK((p1.alpha_deg == p2.alpha_deg).all());
  CHECK((p1.delta_y == p2.delta_y).all());
  CHECK((p1.delta_x == p2.delta_x).all());
  CHECK(p1.k0 == p2.k0);

  CHECK(p1.alpha_deg.abs().maxCoeff() <= 2.0);
  CHECK(p1.delta_y.abs().maxCoeff() <= 1.0 / 0.35 + 1e-12);
  CHECK(p1.delta_x.abs().maxCoeff() <= 0.5 / 0.35 + 1e-12);
  for (Eigen::Index j = 0; j < 64; ++j) {
    if (std::abs(freq_coord(j, 64)) <= p1.k0) {
      CHECK(p1.alpha_deg(j) == 0.0);
      CHECK(p1.delta_y(j) == 0.0);
      CHECK(p1.delta_x(j) == 0.0);
    }
  }

  Rng c(9), d(9);
  const RespiratoryMotionParams r1 = sample_respiratory_params(ranges, c);
  const RespiratoryMotionParams r2 = sample_respiratory_params(ranges, d);
  CHECK(r1.delta == r2.delta);
  CHECK(r1.m == r2.m);
  CHECK(r1.n == r2.n);
  CHECK(r1.k0 == r2.k0);
  CHECK(r1.k0 >= M_PI / 10.0);
  CHECK(r1.k0 <= M_PI / 5.0);
  CHECK(r1.delta >= 1.0 / 0.35);
  CHECK(r1.delta <= 1.5 / 0.35);
  CHECK(r1.m >= 0.1);
  CHECK(r1.m <= 5.0);
  CHECK(r1.n >= 0.0);
  CHECK(r1.n <= M_PI / 4.0);
}

TEST_CASE("degenerate ranges collapse to zero motion") {
  SimulationRanges ranges;
  ranges.alpha_deg = {0.0, 0.0};
  ranges.delta_y_cm = {0.0, 0.0};
  ranges.delta_x_cm = {0.0, 0.0};
  Rng rng(11);
  const RigidMotionParams p = sample_rigid_params(ranges, 16, rng);
  CHECK(p.alpha_deg.abs().maxCoeff() == 0.0);
  CHECK(p.delta_y.abs().maxCoeff() == 0.0);
  CHECK(p.delta_x.abs().maxCoeff() == 0.0);
}

TEST_CASE("rotation draws fill the configured interval") {
  SimulationRanges ranges;
  ranges.rigid_k0 = 0.0;  // only the DC line is zeroed
  Rng rng(123);
  const RigidMotionParams p = sample_rigid_params(ranges, 10000, rng);
  double mean = 0.0;
  for (Eigen::Index j = 0; j < 10000; ++j) {
    if (j == 5000) continue;
    mean += p.alpha_deg(j);
  }
  mean /= 9999.0;
  CHECK(std::abs(mean) <= 0.05);
  CHECK(p.alpha_deg.minCoeff() >= -2.0);
  CHECK(p.alpha_deg.maxCoeff() <= 2.0);
  CHECK(p.alpha_deg.minCoeff() < -1.8);  // draws reach the edges
  CHECK(p.alpha_deg.maxCoeff() > 1.8);
}

TEST_CASE("malformed parameters are rejected") {
  const ComplexImage x = test_image(16, 12);
  RigidMotionParams p = still_params(8);  // wrong line count
  CHECK_THROWS_AS(corrupt_rigid(x, p), std::invalid_argument);

  RigidMotionParams q = still_params(16);
  q.k0 = -0.1;
  CHECK_THROWS_AS(corrupt_rigid(x, q), std::invalid_argument);

  RigidMotionParams band = still_params(16, 0.5);
  band.delta_y(8) = 1.0;  // inside the band but nonzero
  CHECK_THROWS_AS(corrupt_rigid(x, band), std::invalid_argument);

  RespiratoryMotionParams r;
  r.delta = -1.0;
  CHECK_THROWS_AS(corrupt_respiratory(x, r), std::invalid_argument);
}

}  // TEST_SUITE
