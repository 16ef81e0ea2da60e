#pragma once

#include <cstdint>

#include "demotion/rng.hpp"
#include "demotion/types.hpp"

namespace demotion {

// Per-line rigid motion: each phase-encoding line of k-space is taken from a
// copy of the image rotated by alpha and shifted by (delta_y, delta_x).
// Lines inside the central band |k_y| <= k0 stay motion-free.
struct RigidMotionParams {
  Eigen::ArrayXd alpha_deg;  // rotation per line, degrees
  Eigen::ArrayXd delta_y;    // shift along the phase-encode direction, pixels
  Eigen::ArrayXd delta_x;    // shift along the frequency-encode direction, pixels
  double k0 = 0.0;           // uncorrupted half-band, radians in [0, pi]
  PhaseAxis axis = PhaseAxis::cols;

  Eigen::Index n_lines() const { return alpha_deg.size(); }
  void validate() const;
};

// Respiratory motion: sinusoidal phase-encode shift delta * sin(m*k_y + n),
// applied as a pure translation per line outside the central band.
struct RespiratoryMotionParams {
  double delta = 0.0;  // amplitude, pixels; >= 0
  double m = 0.0;      // period parameter
  double n = 0.0;      // phase shift, radians
  double k0 = 0.0;     // uncorrupted half-band, radians in [0, pi]
  PhaseAxis axis = PhaseAxis::cols;

  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  void validate(const char* what) const;
  double sample(Rng& rng) const;  // uniform in [lo, hi); lo == hi yields lo
};

// Physical-unit sampling ranges. Displacement amplitudes are given in cm and
// converted to pixels through pixel_spacing_cm at sampling time.
struct SimulationRanges {
  Interval alpha_deg{-2.0, 2.0};
  Interval delta_y_cm{-1.0, 1.0};
  Interval delta_x_cm{-0.5, 0.5};
  double rigid_k0 = 0.3141592653589793;  // pi/10

  Interval resp_k0{0.3141592653589793, 0.6283185307179586};  // [pi/10, pi/5]
  Interval resp_delta_cm{1.0, 1.5};
  Interval resp_m{0.1, 5.0};
  Interval resp_n{0.0, 0.7853981633974483};  // [0, pi/4]

  double pixel_spacing_cm = 0.07;
  std::uint64_t seed = 0;
  PhaseAxis axis = PhaseAxis::cols;

  void validate() const;
};

struct CorruptionResult {
  KSpace kspace;       // corrupted measurement y
  ComplexImage image;  // ifft2c(y)
};

// Rotation about the image center with bilinear interpolation; samples
// falling outside the frame are zero. Positive angles turn the content
// counterclockwise with row 0 displayed on top.
ComplexImage rotate_about_center(const ComplexImage& x, double degrees);

CorruptionResult corrupt_rigid(const ComplexImage& x, const RigidMotionParams& p);
CorruptionResult corrupt_respiratory(const ComplexImage& x, const RespiratoryMotionParams& p);

// Independent uniform draws per line (alpha, delta_y, delta_x in that order),
// then zeroed on lines with |k_y| <= k0 so the draw count does not depend on
// the band width.
RigidMotionParams sample_rigid_params(const SimulationRanges& ranges, Eigen::Index n_lines, Rng& rng);
RigidMotionParams sample_rigid_params(const SimulationRanges& ranges, Eigen::Index n_lines);

// Draw order: k0, delta, m, n.
RespiratoryMotionParams sample_respiratory_params(const SimulationRanges& ranges, Rng& rng);
RespiratoryMotionParams sample_respiratory_params(const SimulationRanges& ranges);

}  // namespace demotion
