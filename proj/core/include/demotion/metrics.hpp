#pragma once

#include <string>

#include "demotion/types.hpp"

namespace demotion {

struct MetricRecord {
  std::string image_id;
  std::string method;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

// 10 log10(peak^2 / MSE); identical images give +infinity.
double psnr(const RealImage& x, const RealImage& ref, double peak = 1.0);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// population covariances, border cropped to the window's valid region.
// Images must be at least 11 pixels on each side.
double ssim(const RealImage& x, const RealImage& ref, double data_range = 1.0);

}  // namespace demotion
