#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "demotion/harness/dataset.hpp"
#include "demotion/metrics.hpp"
#include "demotion/rng.hpp"

using namespace demotion;

namespace {

const std::string kFixtures = DEMOTION_FIXTURE_DIR;

RealImage uniform_field(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  RealImage x(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      x(i, j) = rng.uniform();
    }
  }
  return x;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr sentinel and closed forms") {
  const RealImage a = RealImage::Constant(16, 16, 0.5);
  CHECK(std::isinf(psnr(a, a)));
  CHECK(psnr(a, a) > 0);

  RealImage b = a;
  b += 0.1;  // MSE = 0.01
  CHECK(std::abs(psnr(b, a) - 20.0) <= 1e-9);
  CHECK(std::abs(psnr(b, a, 2.0) - (20.0 + 10.0 * std::log10(4.0))) <= 1e-9);

  Rng rng(5);
  const RealImage x = uniform_field(32, 32, rng);
  const RealImage ref = uniform_field(32, 32, rng);
  const double mse = (x - ref).square().mean();
  CHECK(std::abs(psnr(x, ref) - 10.0 * std::log10(1.0 / mse)) <= 1e-9);

  CHECK_THROWS_AS(psnr(x, RealImage::Zero(16, 16)), std::invalid_argument);
}

TEST_CASE("ssim is one on identical images") {
  Rng rng(6);
  const RealImage x = uniform_field(24, 24, rng);
  CHECK(std::abs(ssim(x, x) - 1.0) <= 1e-12);
  const RealImage c = RealImage::Constant(16, 16, 0.5);
  CHECK(std::abs(ssim(c, c) - 1.0) <= 1e-12);
}

TEST_CASE("both metrics are symmetric") {
  Rng rng(7);
  const RealImage x = uniform_field(20, 20, rng);
  const RealImage y = uniform_field(20, 20, rng);
  CHECK(psnr(x, y) == psnr(y, x));
  CHECK(std::abs(ssim(x, y) - ssim(y, x)) <= 1e-12);
}

TEST_CASE("growing noise lowers both metrics") {
  Rng rng(8);
  const RealImage ref = make_phantom(32, rng);
  RealImage n(32, 32);
  for (Eigen::Index j = 0; j < 32; ++j) {
    for (Eigen::Index i = 0; i < 32; ++i) {
      n(i, j) = rng.normal();
    }
  }
  double last_psnr = std::numeric_limits<double>::infinity();
  double last_ssim = 1.0;
  for (const double s : {0.01, 0.03, 0.09}) {
    const RealImage noisy = ref + s * n;
    const double p = psnr(noisy, ref);
    const double q = ssim(noisy, ref);
    CHECK(p < last_psnr);
    CHECK(q < last_ssim);
    last_psnr = p;
    last_ssim = q;
  }
}

TEST_CASE("fixture values match the reference implementation") {
  const RealImage ref = load_npy_real(kFixtures + "/ssim_ref.npy");
  const RealImage noisy = load_npy_real(kFixtures + "/ssim_noisy.npy");
  const RealImage rough = load_npy_real(kFixtures + "/ssim_rough.npy");

  CHECK(std::abs(ssim(noisy, ref) - 0.26199282346693964) <= 1e-6);
  CHECK(std::abs(ssim(rough, ref) - 0.011584387559272715) <= 1e-6);
  CHECK(std::abs(psnr(noisy, ref) - 21.928799331507452) <= 1e-9);
  CHECK(std::abs(psnr(rough, ref) - 9.214102491290916) <= 1e-9);
}

TEST_CASE("window smaller than the image is required") {
  const RealImage tiny = RealImage::Constant(8, 8, 0.5);
  CHECK_THROWS_AS(ssim(tiny, tiny), std::invalid_argument);
  const RealImage a = RealImage::Constant(16, 16, 0.5);
  CHECK_THROWS_AS(ssim(a, RealImage::Constant(16, 15, 0.5)), std::invalid_argument);
}

}  // TEST_SUITE
