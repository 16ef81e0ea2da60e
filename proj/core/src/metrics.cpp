#include "demotion/metrics.hpp"

#include <cmath>
#include <limits>

namespace demotion {

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

struct Kernel {
  double w[kWindow];
  Kernel() {
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double t = (i - kRadius) / kSigma;
      w[i] = std::exp(-0.5 * t * t);
      sum += w[i];
    }
    for (double& v : w) v /= sum;
  }
};

// Separable Gaussian correlation keeping only the fully-covered interior,
// so boundary handling never enters the result.
RealImage filter_valid(const RealImage& x) {
  static const Kernel k;
  const Eigen::Index rows = x.rows();
  const Eigen::Index cols = x.cols();
  RealImage tmp(rows - 2 * kRadius, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < tmp.rows(); ++i) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) acc += k.w[t] * x(i + t, j);
      tmp(i, j) = acc;
    }
  RealImage out(tmp.rows(), cols - 2 * kRadius);
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      double acc = 0.0;
      for (int t = 0; t < kWindow; ++t) acc += k.w[t] * tmp(i, j + t);
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

double psnr(const RealImage& x, const RealImage& ref, double peak) {
  require(x.rows() == ref.rows() && x.cols() == ref.cols(), "psnr: shape mismatch");
  require(std::isfinite(peak) && peak > 0.0, "psnr: peak must be positive");
  const double mse = (x - ref).square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const RealImage& x, const RealImage& ref, double data_range) {
  require(x.rows() == ref.rows() && x.cols() == ref.cols(), "ssim: shape mismatch");
  require(x.rows() >= kWindow && x.cols() >= kWindow,
          "ssim: image smaller than the 11x11 window");
  require(std::isfinite(data_range) && data_range > 0.0,
          "ssim: data_range must be positive");

  const double c1 = (kK1 * data_range) * (kK1 * data_range);
  const double c2 = (kK2 * data_range) * (kK2 * data_range);

  const RealImage mu_x = filter_valid(x);
  const RealImage mu_y = filter_valid(ref);
  const RealImage var_x = filter_valid(x.square()) - mu_x.square();
  const RealImage var_y = filter_valid(ref.square()) - mu_y.square();
  const RealImage cov = filter_valid(x * ref) - mu_x * mu_y;

  const RealImage num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
  const RealImage den = (mu_x.square() + mu_y.square() + c1) * (var_x + var_y + c2);
  return (num / den).mean();
}

}  // namespace demotion
