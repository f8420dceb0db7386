#pragma once

// Full-reference image quality metrics on display-referred images.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drht/data.hpp"

namespace drht {

/// Reported for identical images instead of +inf.
inline constexpr double kPsnrCap = 99.0;

/// Peak 1.0; plain mean squared error over all channels.
double psnr(const LdrImage& a, const LdrImage& b);

/// Luma SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2,
/// averaged over window positions that lie fully inside the image.
double ssim(const LdrImage& a, const LdrImage& b);

/// Luma FSIM: phase congruency from a 4-scale, 4-orientation log-Gabor bank
/// combined with Scharr gradient magnitude. Needs at least 32x32 pixels.
double fsim(const LdrImage& a, const LdrImage& b);

/// 0.299 R + 0.587 G + 0.114 B, row-major.
std::vector<double> luma(const LdrImage& img);

/// Phase congruency map of a row-major image, same layout.
std::vector<double> phase_congruency(const std::vector<double>& image, std::size_t rows, std::size_t cols);

struct ImageMetrics {
  std::string path;
  double psnr = 0.0;
  double ssim = 0.0;
  double fsim = 0.0;
  std::optional<std::string> error;  // set when the pair could not be evaluated
};

struct MetricReport {
  std::vector<ImageMetrics> per_image;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_fsim = 0.0;
  std::size_t evaluated = 0;

  /// Recomputes the means over the entries without an error.
  void finalize();
  nlohmann::json to_json() const;
};

ImageMetrics evaluate_pair(const LdrImage& prediction, const LdrImage& reference);

}  // namespace drht
