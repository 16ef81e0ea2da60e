#include "demotion/motion.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "demotion/kspace.hpp"

namespace demotion {

namespace {

constexpr double kPi = std::numbers::pi;

void check_band_zeroed(const Eigen::ArrayXd& values, double k0, const char* name) {
  const Eigen::Index n = values.size();
  for (Eigen::Index l = 0; l < n; ++l) {
    if (std::abs(freq_coord(l, n)) <= k0 && values[l] != 0.0)
      throw std::invalid_argument(std::string(name) +
                                  " must be zero on lines with |k_y| <= k0");
  }
}

}  // namespace

void RigidMotionParams::validate() const {
  require(alpha_deg.size() >= 4, "rigid params need at least 4 phase-encoding lines");
  require(delta_y.size() == alpha_deg.size() && delta_x.size() == alpha_deg.size(),
          "rigid param arrays must share one length");
  require(alpha_deg.allFinite() && delta_y.allFinite() && delta_x.allFinite(),
          "rigid params must be finite");
  require(std::isfinite(k0) && k0 >= 0.0 && k0 <= kPi, "k0 must lie in [0, pi]");
  check_band_zeroed(alpha_deg, k0, "alpha");
  check_band_zeroed(delta_y, k0, "delta_y");
  check_band_zeroed(delta_x, k0, "delta_x");
}

void RespiratoryMotionParams::validate() const {
  require(std::isfinite(delta) && delta >= 0.0, "delta must be >= 0");
  require(std::isfinite(m) && std::isfinite(n), "m and n must be finite");
  require(std::isfinite(k0) && k0 >= 0.0 && k0 <= kPi, "k0 must lie in [0, pi]");
}

void Interval::validate(const char* what) const {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo <= hi))
    throw std::invalid_argument(std::string(what) + ": interval must satisfy lo <= hi");
}

double Interval::sample(Rng& rng) const {
  return rng.uniform(lo, hi);
}

void SimulationRanges::validate() const {
  alpha_deg.validate("alpha_deg");
  delta_y_cm.validate("delta_y_cm");
  delta_x_cm.validate("delta_x_cm");
  require(std::isfinite(rigid_k0) && rigid_k0 >= 0.0 && rigid_k0 <= kPi,
          "rigid_k0 must lie in [0, pi]");
  resp_k0.validate("resp_k0");
  require(resp_k0.lo >= 0.0 && resp_k0.hi <= kPi, "resp_k0 must lie in [0, pi]");
  resp_delta_cm.validate("resp_delta_cm");
  require(resp_delta_cm.lo >= 0.0, "resp_delta_cm must be non-negative");
  resp_m.validate("resp_m");
  resp_n.validate("resp_n");
  require(std::isfinite(pixel_spacing_cm) && pixel_spacing_cm > 0.0,
          "pixel_spacing_cm must be positive");
}

ComplexImage rotate_about_center(const ComplexImage& x, double degrees) {
  require(x.rows() >= 4 && x.cols() >= 4, "rotation needs at least a 4x4 image");
  require(std::isfinite(degrees), "rotation angle must be finite");
  if (degrees == 0.0) return x;

  const Eigen::Index rows = x.rows();
  const Eigen::Index cols = x.cols();
  const double cy = 0.5 * static_cast<double>(rows - 1);
  const double cx = 0.5 * static_cast<double>(cols - 1);
  const double rad = degrees * kPi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);

  ComplexImage out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const double v = static_cast<double>(j) - cx;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double u = static_cast<double>(i) - cy;
      // Inverse map of a counterclockwise content rotation (rows grow
      // downward, so the row axis carries a sign flip).
      const double src_r = u * c + v * s + cy;
      const double src_c = v * c - u * s + cx;
      const double fr = std::floor(src_r);
      const double fc = std::floor(src_c);
      const Eigen::Index r0 = static_cast<Eigen::Index>(fr);
      const Eigen::Index c0 = static_cast<Eigen::Index>(fc);
      const double wr = src_r - fr;
      const double wc = src_c - fc;
      auto at = [&](Eigen::Index r, Eigen::Index cc) -> Complex {
        if (r < 0 || r >= rows || cc < 0 || cc >= cols) return Complex(0.0, 0.0);
        return x(r, cc);
      };
      out(i, j) = (1.0 - wr) * (1.0 - wc) * at(r0, c0) +
                  (1.0 - wr) * wc * at(r0, c0 + 1) +
                  wr * (1.0 - wc) * at(r0 + 1, c0) +
                  wr * wc * at(r0 + 1, c0 + 1);
    }
  }
  return out;
}

namespace {

// Multiplies one phase-encoding line of dst by exp(-i phi(kx)), taking the
// source samples from src. phi depends on the frequency coordinate along
// the line through delta_x; the k_y term is constant per line.
void fill_line(KSpace& dst, const KSpace& src, PhaseAxis axis, Eigen::Index line,
               double ky, double delta_y, double delta_x) {
  const Eigen::Index n_fe = axis == PhaseAxis::cols ? dst.rows() : dst.cols();
  const double base_phase = ky * delta_y;
  for (Eigen::Index f = 0; f < n_fe; ++f) {
    const double kx = freq_coord(f, n_fe);
    const double phi = base_phase + kx * delta_x;
    const Complex w = std::polar(1.0, -phi);
    if (axis == PhaseAxis::cols)
      dst(f, line) = src(f, line) * w;
    else
      dst(line, f) = src(line, f) * w;
  }
}

}  // namespace

CorruptionResult corrupt_rigid(const ComplexImage& x, const RigidMotionParams& p) {
  p.validate();
  const Eigen::Index n_pe = axis_extent(x, p.axis);
  require(p.n_lines() == n_pe, "rigid params sized for a different phase-encode extent");

  const KSpace base = fft2c(x);
  KSpace y = base;
  for (Eigen::Index l = 0; l < n_pe; ++l) {
    const double ky = freq_coord(l, n_pe);
    if (std::abs(ky) <= p.k0) continue;
    const double alpha = p.alpha_deg[l];
    const double dy = p.delta_y[l];
    const double dx = p.delta_x[l];
    if (alpha == 0.0 && dy == 0.0 && dx == 0.0) continue;
    // One transform per rotated line; alpha = 0 reuses the base spectrum.
    const KSpace line_spec = alpha == 0.0 ? base : fft2c(rotate_about_center(x, alpha));
    fill_line(y, line_spec, p.axis, l, ky, dy, dx);
  }
  return CorruptionResult{y, ifft2c(y)};
}

CorruptionResult corrupt_respiratory(const ComplexImage& x, const RespiratoryMotionParams& p) {
  p.validate();
  const Eigen::Index n_pe = axis_extent(x, p.axis);

  const KSpace base = fft2c(x);
  KSpace y = base;
  for (Eigen::Index l = 0; l < n_pe; ++l) {
    const double ky = freq_coord(l, n_pe);
    if (std::abs(ky) <= p.k0) continue;
    const double shift = p.delta * std::sin(p.m * ky + p.n);
    if (shift == 0.0) continue;
    fill_line(y, base, p.axis, l, ky, shift, 0.0);
  }
  return CorruptionResult{y, ifft2c(y)};
}

RigidMotionParams sample_rigid_params(const SimulationRanges& ranges, Eigen::Index n_lines,
                                      Rng& rng) {
  ranges.validate();
  require(n_lines >= 4, "need at least 4 phase-encoding lines");

  RigidMotionParams p;
  p.alpha_deg.resize(n_lines);
  p.delta_y.resize(n_lines);
  p.delta_x.resize(n_lines);
  p.k0 = ranges.rigid_k0;
  p.axis = ranges.axis;
  for (Eigen::Index l = 0; l < n_lines; ++l) {
    p.alpha_deg[l] = ranges.alpha_deg.sample(rng);
    p.delta_y[l] = ranges.delta_y_cm.sample(rng) / ranges.pixel_spacing_cm;
    p.delta_x[l] = ranges.delta_x_cm.sample(rng) / ranges.pixel_spacing_cm;
  }
  for (Eigen::Index l = 0; l < n_lines; ++l) {
    if (std::abs(freq_coord(l, n_lines)) <= p.k0) {
      p.alpha_deg[l] = 0.0;
      p.delta_y[l] = 0.0;
      p.delta_x[l] = 0.0;
    }
  }
  return p;
}

RigidMotionParams sample_rigid_params(const SimulationRanges& ranges, Eigen::Index n_lines) {
  Rng rng(ranges.seed);
  return sample_rigid_params(ranges, n_lines, rng);
}

RespiratoryMotionParams sample_respiratory_params(const SimulationRanges& ranges, Rng& rng) {
  ranges.validate();
  RespiratoryMotionParams p;
  p.k0 = ranges.resp_k0.sample(rng);
  p.delta = ranges.resp_delta_cm.sample(rng) / ranges.pixel_spacing_cm;
  p.m = ranges.resp_m.sample(rng);
  p.n = ranges.resp_n.sample(rng);
  p.axis = ranges.axis;
  return p;
}

RespiratoryMotionParams sample_respiratory_params(const SimulationRanges& ranges) {
  Rng rng(ranges.seed);
  return sample_respiratory_params(ranges, rng);
}

}  // namespace demotion
