#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace demotion {

using Complex = std::complex<double>;

// 2D complex-valued array in the image domain, (rows x cols).
// Rows run along the frequency-encoding direction by default; which axis
// carries the phase encoding is selected with PhaseAxis where it matters.
using ComplexImage = Eigen::ArrayXXcd;

// Same storage as ComplexImage, interpreted in the spatial-frequency
// domain with DC at (rows/2, cols/2).
using KSpace = Eigen::ArrayXXcd;

using RealImage = Eigen::ArrayXXd;

enum class PhaseAxis { rows, cols };

inline Eigen::Index axis_extent(const ComplexImage& x, PhaseAxis axis) {
  return axis == PhaseAxis::rows ? x.rows() : x.cols();
}

inline bool all_finite(const ComplexImage& x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Complex& v = x(i, j);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
  return true;
}

inline bool all_finite(const RealImage& x) {
  return x.allFinite();
}

inline double l2_norm(const ComplexImage& x) {
  return std::sqrt(x.abs2().sum());
}

inline double l2_norm(const RealImage& x) {
  return std::sqrt(x.square().sum());
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline void require_same_shape(const ComplexImage& a, const ComplexImage& b,
                               const std::string& what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), what + ": shape mismatch");
}

// Magnitude image; the display convention is the clamped real part, see
// display_real().
inline RealImage magnitude(const ComplexImage& x) {
  return x.abs();
}

// Real part clamped to >= 0, used for display and metrics only. The
// sampler state itself always stays complex.
inline RealImage display_real(const ComplexImage& x) {
  return x.real().max(0.0);
}

inline ComplexImage to_complex(const RealImage& x) {
  return x.cast<Complex>();
}

}  // namespace demotion
