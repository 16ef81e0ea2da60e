#pragma once

#include "demotion/types.hpp"

#include <cstdint>

namespace demotion {

// Centered orthonormal 2D Fourier transform: DC lands at (rows/2, cols/2)
// and ||fft2c(x)|| == ||x||. Rejects non-finite input.
KSpace fft2c(const ComplexImage& x);

// Exact inverse of fft2c.
ComplexImage ifft2c(const KSpace& y);

// Normalized frequency coordinate of line `index` on an axis of extent `n`,
// in [-pi, pi) with DC at floor(n/2).
double freq_coord(Eigen::Index index, Eigen::Index n);

// Binary mask retaining a contiguous central band of phase-encoding lines.
struct LowFreqMask {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  PhaseAxis axis = PhaseAxis::cols;
  double rho = 0.0;
  // One flag per phase-encoding line; length = extent of the phase axis.
  Eigen::Array<bool, Eigen::Dynamic, 1> lines;

  Eigen::Index phase_extent() const { return axis == PhaseAxis::rows ? rows : cols; }
  Eigen::Index active_line_count() const { return lines.count(); }
  RealImage to_array() const;
};

// Central band of round(rho * extent) lines centered on the DC line.
// rho = 0 gives an empty mask, rho = 1 all lines.
LowFreqMask make_lowfreq_mask(Eigen::Index rows, Eigen::Index cols, double rho,
                              PhaseAxis axis = PhaseAxis::cols);

// Pointwise multiplication of k-space by the mask.
KSpace apply_mask(const LowFreqMask& mask, const KSpace& y);

// Annealed low-frequency consistency:
//   (1 - lambda) (I - F^-1 P F) x  +  lambda F^-1 (I - P) y  +  F^-1 P y
// lambda = 0 is plain replacement of the masked band; lambda = 1 returns
// ifft2c(y) regardless of x.
ComplexImage data_consistency(const ComplexImage& x, const KSpace& y,
                              const LowFreqMask& mask, double lambda);

// Power-iteration estimate of ||(1 - lambda)(I - F^-1 P F)||. The linear
// part of the consistency step; the estimate never exceeds 1 + 1e-9.
double dc_operator_norm_bound(const LowFreqMask& mask, double lambda,
                              int power_iterations = 30,
                              std::uint64_t seed = 0x5EEDu);

}  // namespace demotion
