#include "demotion/kspace.hpp"

#include "demotion/rng.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace demotion {
namespace {

// Plan cache. Plans are created once per (rows, cols, sign) under a lock
// and executed through the new-array interface; execution itself is
// re-entrant. FFTW_ESTIMATE keeps planning deterministic.
class FftEngine {
 public:
  static FftEngine& instance() {
    static FftEngine engine;
    return engine;
  }

  void execute(const ComplexImage& in, ComplexImage& out, int sign) {
    const auto rows = in.rows();
    const auto cols = in.cols();
    fftw_plan plan = get_plan(rows, cols, sign);
    // Eigen is column-major: memory is `cols` contiguous runs of length
    // `rows`, i.e. a row-major (cols x rows) array. The 2D DFT is
    // axis-separable, so transforming the transposed view transforms both
    // axes of the original.
    auto* src = reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data()));
    auto* dst = reinterpret_cast<fftw_complex*>(out.data());
    fftw_execute_dft(plan, src, dst);
  }

 private:
  fftw_plan get_plan(Eigen::Index rows, Eigen::Index cols, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    const auto key = std::make_tuple(rows, cols, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<Complex> scratch(static_cast<std::size_t>(rows * cols));
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(cols), static_cast<int>(rows),
                                      buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  std::mutex mu_;
  std::map<std::tuple<Eigen::Index, Eigen::Index, int>, fftw_plan> plans_;
};

// Circular roll by (dr, dc); positive shifts move content toward higher
// indices.
ComplexImage roll(const ComplexImage& x, Eigen::Index dr, Eigen::Index dc) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  ComplexImage out(rows, cols);
  dr = ((dr % rows) + rows) % rows;
  dc = ((dc % cols) + cols) % cols;
  for (Eigen::Index j = 0; j < cols; ++j) {
    const Eigen::Index js = (j + dc) % cols;
    for (Eigen::Index i = 0; i < rows; ++i) out((i + dr) % rows, js) = x(i, j);
  }
  return out;
}

ComplexImage fftshift(const ComplexImage& x) {
  return roll(x, x.rows() / 2, x.cols() / 2);
}

ComplexImage ifftshift(const ComplexImage& x) {
  return roll(x, -(x.rows() / 2), -(x.cols() / 2));
}

ComplexImage centered_transform(const ComplexImage& x, int sign, const char* name) {
  require(x.rows() >= 1 && x.cols() >= 1, std::string(name) + ": empty input");
  require(all_finite(x), std::string(name) + ": non-finite input");
  ComplexImage shifted = ifftshift(x);
  ComplexImage transformed(x.rows(), x.cols());
  FftEngine::instance().execute(shifted, transformed, sign);
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.rows() * x.cols()));
  return fftshift(transformed) * scale;
}

}  // namespace

KSpace fft2c(const ComplexImage& x) {
  return centered_transform(x, FFTW_FORWARD, "fft2c");
}

ComplexImage ifft2c(const KSpace& y) {
  return centered_transform(y, FFTW_BACKWARD, "ifft2c");
}

double freq_coord(Eigen::Index index, Eigen::Index n) {
  return 2.0 * M_PI * static_cast<double>(index - n / 2) / static_cast<double>(n);
}

RealImage LowFreqMask::to_array() const {
  RealImage m = RealImage::Zero(rows, cols);
  if (axis == PhaseAxis::rows) {
    for (Eigen::Index i = 0; i < rows; ++i)
      if (lines[i]) m.row(i).setConstant(1.0);
  } else {
    for (Eigen::Index j = 0; j < cols; ++j)
      if (lines[j]) m.col(j).setConstant(1.0);
  }
  return m;
}

LowFreqMask make_lowfreq_mask(Eigen::Index rows, Eigen::Index cols, double rho,
                              PhaseAxis axis) {
  require(rows >= 1 && cols >= 1, "make_lowfreq_mask: empty shape");
  require(rho >= 0.0 && rho <= 1.0, "make_lowfreq_mask: rho outside [0, 1]");
  LowFreqMask mask;
  mask.rows = rows;
  mask.cols = cols;
  mask.axis = axis;
  mask.rho = rho;
  const Eigen::Index n = mask.phase_extent();
  mask.lines = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, false);
  const auto band = static_cast<Eigen::Index>(std::lround(rho * static_cast<double>(n)));
  const Eigen::Index center = n / 2;
  const Eigen::Index start = center - band / 2;
  for (Eigen::Index k = 0; k < band; ++k) {
    const Eigen::Index idx = start + k;
    if (idx >= 0 && idx < n) mask.lines[idx] = true;
  }
  return mask;
}

KSpace apply_mask(const LowFreqMask& mask, const KSpace& y) {
  require(y.rows() == mask.rows && y.cols() == mask.cols, "apply_mask: shape mismatch");
  KSpace out = KSpace::Zero(y.rows(), y.cols());
  if (mask.axis == PhaseAxis::rows) {
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      if (mask.lines[i]) out.row(i) = y.row(i);
  } else {
    for (Eigen::Index j = 0; j < y.cols(); ++j)
      if (mask.lines[j]) out.col(j) = y.col(j);
  }
  return out;
}

ComplexImage data_consistency(const ComplexImage& x, const KSpace& y,
                              const LowFreqMask& mask, double lambda) {
  require_same_shape(x, y, "data_consistency");
  require(x.rows() == mask.rows && x.cols() == mask.cols,
          "data_consistency: mask shape mismatch");
  require(lambda >= 0.0 && lambda <= 1.0, "data_consistency: lambda outside [0, 1]");
  // All three terms combined in k-space:
  //   (1 - lambda) (I - P) X  +  lambda (I - P) Y  +  P Y
  KSpace xk = fft2c(x);
  KSpace combined(x.rows(), x.cols());
  const bool by_rows = mask.axis == PhaseAxis::rows;
  const Eigen::Index n = mask.phase_extent();
  for (Eigen::Index l = 0; l < n; ++l) {
    if (by_rows) {
      if (mask.lines[l])
        combined.row(l) = y.row(l);
      else
        combined.row(l) = (1.0 - lambda) * xk.row(l) + lambda * y.row(l);
    } else {
      if (mask.lines[l])
        combined.col(l) = y.col(l);
      else
        combined.col(l) = (1.0 - lambda) * xk.col(l) + lambda * y.col(l);
    }
  }
  return ifft2c(combined);
}

double dc_operator_norm_bound(const LowFreqMask& mask, double lambda,
                              int power_iterations, std::uint64_t seed) {
  require(lambda >= 0.0 && lambda <= 1.0, "dc_operator_norm_bound: lambda outside [0, 1]");
  require(power_iterations >= 1, "dc_operator_norm_bound: need at least one iteration");
  if (lambda == 1.0) return 0.0;
  Rng rng(seed);
  ComplexImage v = rng.complex_normal_field(mask.rows, mask.cols);
  double estimate = 0.0;
  for (int it = 0; it < power_iterations; ++it) {
    const double norm_v = l2_norm(v);
    if (norm_v == 0.0) return 0.0;
    v /= norm_v;
    // A v = (1 - lambda) (v - F^-1 P F v)
    KSpace vk = fft2c(v);
    ComplexImage low = ifft2c(apply_mask(mask, vk));
    v = (1.0 - lambda) * (v - low);
    estimate = l2_norm(v);
  }
  return estimate;
}

}  // namespace demotion
