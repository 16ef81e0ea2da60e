#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "demotion/kspace.hpp"
#include "demotion/rng.hpp"

using namespace demotion;

namespace {

double rel_err(const ComplexImage& a, const ComplexImage& b) {
  const double ref = l2_norm(b);
  return l2_norm(ComplexImage(a - b)) / (ref > 0 ? ref : 1.0);
}

}  // namespace

TEST_SUITE("kspace") {

TEST_CASE("center impulse spreads into a flat spectrum") {
  ComplexImage x = ComplexImage::Zero(8, 8);
  x(4, 4) = 1.0;  // DC pixel at floor(n/2)
  const KSpace y = fft2c(x);
  const double flat = 1.0 / 8.0;  // 1/sqrt(64)
  CHECK((y - flat).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("constant image concentrates at the DC sample") {
  const double c = 0.37;
  const ComplexImage x = ComplexImage::Constant(16, 12, c);
  KSpace y = fft2c(x);
  CHECK(std::abs(y(8, 6) - Complex(c * std::sqrt(16.0 * 12.0))) <= 1e-9);
  y(8, 6) = 0.0;
  CHECK(y.abs().maxCoeff() <= 1e-9);
}

TEST_CASE("transform is unitary on random fields") {
  Rng rng(11);
  const std::vector<std::pair<int, int>> shapes{{64, 64}, {32, 48}, {5, 7}, {1, 9}};
  for (const auto& [r, c] : shapes) {
    CAPTURE(r);
    CAPTURE(c);
    const ComplexImage x = rng.complex_normal_field(r, c);
    const KSpace y = fft2c(x);
    CHECK(std::abs(l2_norm(y) - l2_norm(x)) <= 1e-10 * l2_norm(x));
    CHECK(rel_err(ifft2c(y), x) <= 1e-10);
    CHECK(rel_err(fft2c(ifft2c(x)), x) <= 1e-10);
  }
}

TEST_CASE("DC-only spectrum inverts to a constant image") {
  KSpace y = KSpace::Zero(8, 8);
  const double c = -1.25;
  y(4, 4) = c * 8.0;
  const ComplexImage x = ifft2c(y);
  CHECK((x - c).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("non-finite input is rejected") {
  ComplexImage x = ComplexImage::Zero(8, 8);
  x(1, 2) = Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
  CHECK_THROWS_AS(fft2c(x), std::invalid_argument);
  CHECK_THROWS_AS(ifft2c(x), std::invalid_argument);
  CHECK_THROWS_AS(fft2c(ComplexImage(0, 0)), std::invalid_argument);
}

TEST_CASE("frequency coordinates are centered") {
  CHECK(freq_coord(32, 64) == 0.0);
  CHECK(freq_coord(0, 64) == doctest::Approx(-M_PI).epsilon(1e-12));
  CHECK(freq_coord(33, 64) == doctest::Approx(2.0 * M_PI / 64.0).epsilon(1e-12));
  CHECK(freq_coord(2, 5) == 0.0);
}

TEST_CASE("mask keeps a centered contiguous band") {
  CHECK(make_lowfreq_mask(320, 320, 0.1).active_line_count() == 32);
  CHECK(make_lowfreq_mask(64, 64, 1.0).active_line_count() == 64);
  CHECK(make_lowfreq_mask(64, 64, 0.0).active_line_count() == 0);

  const LowFreqMask m = make_lowfreq_mask(64, 64, 0.1);
  CHECK(m.active_line_count() == 6);
  CHECK(m.lines(32));  // DC line included
  // contiguity: active flags form one block
  int first = -1, last = -1;
  for (int j = 0; j < 64; ++j) {
    if (m.lines(j)) {
      if (first < 0) first = j;
      last = j;
    }
  }
  CHECK(last - first + 1 == m.active_line_count());

  // binary projector: the array equals its own square
  const RealImage arr = m.to_array();
  CHECK((arr * arr - arr).abs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(make_lowfreq_mask(64, 64, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(make_lowfreq_mask(64, 64, -0.1), std::invalid_argument);
}

TEST_CASE("mask follows the phase axis") {
  const LowFreqMask m = make_lowfreq_mask(16, 64, 0.25, PhaseAxis::rows);
  CHECK(m.phase_extent() == 16);
  CHECK(m.active_line_count() == 4);
  CHECK(m.lines.size() == 16);

  Rng rng(2);
  const KSpace y = rng.complex_normal_field(16, 64);
  const KSpace masked = apply_mask(m, y);
  for (int i = 0; i < 16; ++i) {
    if (m.lines(i)) {
      CHECK((masked.row(i) == y.row(i)).all());
    } else {
      CHECK((masked.row(i) == Complex(0.0)).all());
    }
  }
}

TEST_CASE("consistency collapses to the measurement at lambda 1 or a full mask") {
  Rng rng(3);
  const ComplexImage x = rng.complex_normal_field(16, 16);
  const KSpace y = fft2c(rng.complex_normal_field(16, 16));
  const ComplexImage inv = ifft2c(y);
  CHECK(rel_err(data_consistency(x, y, make_lowfreq_mask(16, 16, 0.25), 1.0), inv) <= 1e-12);
  CHECK(rel_err(data_consistency(x, y, make_lowfreq_mask(16, 16, 1.0), 0.37), inv) <= 1e-12);
}

TEST_CASE("a consistent state is a fixed point at lambda 0") {
  Rng rng(4);
  const ComplexImage x = rng.complex_normal_field(24, 24);
  const KSpace y = fft2c(x);
  CHECK(rel_err(data_consistency(x, y, make_lowfreq_mask(24, 24, 0.1), 0.0), x) <= 1e-10);
}

TEST_CASE("plain replacement is idempotent") {
  Rng rng(5);
  const LowFreqMask m = make_lowfreq_mask(24, 24, 0.2);
  const ComplexImage x = rng.complex_normal_field(24, 24);
  const KSpace y = fft2c(rng.complex_normal_field(24, 24));
  const ComplexImage once = data_consistency(x, y, m, 0.0);
  const ComplexImage twice = data_consistency(once, y, m, 0.0);
  CHECK(rel_err(twice, once) <= 1e-10);
}

TEST_CASE("replacement splits the spectrum between measurement and input") {
  Rng rng(6);
  const LowFreqMask m = make_lowfreq_mask(32, 32, 0.3);
  const ComplexImage x = rng.complex_normal_field(32, 32);
  const KSpace y = fft2c(rng.complex_normal_field(32, 32));
  const KSpace out = fft2c(data_consistency(x, y, m, 0.0));
  const KSpace fx = fft2c(x);
  for (int j = 0; j < 32; ++j) {
    const KSpace& src = m.lines(j) ? y : fx;
    CHECK((out.col(j) - src.col(j)).abs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("operator norm bound examples") {
  const LowFreqMask m = make_lowfreq_mask(64, 64, 0.1);
  CHECK(dc_operator_norm_bound(m, 1.0) <= 1e-12);
  CHECK(dc_operator_norm_bound(make_lowfreq_mask(64, 64, 0.0), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(dc_operator_norm_bound(m, 0.01) == doctest::Approx(0.99).epsilon(1e-6));
  for (const double lam : {0.0, 0.005, 0.01, 0.5, 1.0}) {
    CHECK(dc_operator_norm_bound(m, lam) <= 1.0 + 1e-9);
  }
}

TEST_CASE("consistency never expands distances") {
  Rng rng(7);
  const LowFreqMask m = make_lowfreq_mask(32, 32, 0.1);
  const KSpace y = fft2c(rng.complex_normal_field(32, 32));
  for (const double lam : {0.0, 0.005, 0.01, 0.5, 1.0}) {
    CAPTURE(lam);
    for (int t = 0; t < 20; ++t) {
      const ComplexImage a = rng.complex_normal_field(32, 32);
      const ComplexImage b = rng.complex_normal_field(32, 32);
      const double before = l2_norm(ComplexImage(a - b));
      const double after = l2_norm(ComplexImage(
          data_consistency(a, y, m, lam) - data_consistency(b, y, m, lam)));
      CHECK(after <= before * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("consistency validates shapes and lambda") {
  Rng rng(8);
  const ComplexImage x = rng.complex_normal_field(16, 16);
  const KSpace y = fft2c(x);
  CHECK_THROWS_AS(data_consistency(x, y, make_lowfreq_mask(8, 8, 0.5), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(data_consistency(x, y, make_lowfreq_mask(16, 16, 0.5), -0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(data_consistency(x, y, make_lowfreq_mask(16, 16, 0.5), 1.1),
                  std::invalid_argument);
}

}  // TEST_SUITE
