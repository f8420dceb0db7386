#include "drht/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

namespace drht {

using nlohmann::json;

namespace {

void require_same_dims(const LdrImage& a, const LdrImage& b, const char* metric) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError(std::string(metric) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                     ")");
  }
  if (a.empty()) throw ShapeError(std::string(metric) + ": empty image");
}

}  // namespace

std::vector<double> luma(const LdrImage& img) {
  std::vector<double> y(img.width * img.height);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 0.299 * img.pixels[3 * i] + 0.587 * img.pixels[3 * i + 1] + 0.114 * img.pixels[3 * i + 2];
  }
  return y;
}

double psnr(const LdrImage& a, const LdrImage& b) {
  require_same_dims(a, b, "psnr");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.pixels.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

// ---------------------------------------------------------------------------
// SSIM

double ssim(const LdrImage& a, const LdrImage& b) {
  require_same_dims(a, b, "ssim");
  constexpr std::size_t kWin = 11;
  constexpr double kSigma = 1.5, kC1 = 1e-4, kC2 = 9e-4;
  if (a.width < kWin || a.height < kWin) {
    throw ShapeError("ssim: image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " is smaller than the 11x11 window");
  }
  double g[kWin];
  double gsum = 0.0;
  for (std::size_t i = 0; i < kWin; ++i) {
    const double d = static_cast<double>(i) - 5.0;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const std::vector<double> x = luma(a), y = luma(b);
  const std::size_t w = a.width, h = a.height;
  const std::size_t ow = w - kWin + 1, oh = h - kWin + 1;

  // Separable weighted moments: horizontal pass, then vertical.
  std::vector<double> hx(h * ow), hy(h * ow), hxx(h * ow), hyy(h * ow), hxy(h * ow);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t k = 0; k < kWin; ++k) {
        const double xv = x[r * w + c + k], yv = y[r * w + c + k];
        sx += g[k] * xv;
        sy += g[k] * yv;
        sxx += g[k] * xv * xv;
        syy += g[k] * yv * yv;
        sxy += g[k] * (xv * yv);
      }
      const std::size_t o = r * ow + c;
      hx[o] = sx, hy[o] = sy, hxx[o] = sxx, hyy[o] = syy, hxy[o] = sxy;
    }
  }
  double total = 0.0;
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
      for (std::size_t k = 0; k < kWin; ++k) {
        const std::size_t o = (r + k) * ow + c;
        mx += g[k] * hx[o];
        my += g[k] * hy[o];
        exx += g[k] * hxx[o];
        eyy += g[k] * hyy[o];
        exy += g[k] * hxy[o];
      }
      const double vx = exx - mx * mx, vy = eyy - my * my, cxy = exy - mx * my;
      total += ((2 * (mx * my) + kC1) * (2 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
    }
  }
  return total / static_cast<double>(ow * oh);
}

// ---------------------------------------------------------------------------
// FSIM

namespace {

// Planner calls are not thread-safe in FFTW; execution on distinct plans is.
std::mutex g_fftw_planner;

class Fft2d {
 public:
  Fft2d(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), buf_(rows * cols) {
    auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
    std::lock_guard lock(g_fftw_planner);
    fwd_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft2d() {
    std::lock_guard lock(g_fftw_planner);
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  std::vector<std::complex<double>>& buffer() { return buf_; }
  void forward() { fftw_execute(fwd_); }
  /// Normalized inverse, like ifft2.
  void inverse() {
    fftw_execute(inv_);
    const double scale = 1.0 / static_cast<double>(rows_ * cols_);
    for (auto& v : buf_) v *= scale;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<std::complex<double>> buf_;
  fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

// Normalized frequency coordinates of one axis in unshifted FFT order.
std::vector<double> frequency_axis(std::size_t n) {
  std::vector<double> shifted(n);
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(i);
    shifted[i] = (n % 2) ? (k - (nn - 1) / 2) / (nn - 1) : (k - nn / 2) / nn;
  }
  // ifftshift: element (i + n/2) of the centred axis moves to position i.
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = shifted[(i + n / 2) % n];
  return out;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lo + hi);
}

// 'same'-size zero-padded correlation with a 3x3 kernel.
std::vector<double> filter3x3(const std::vector<double>& img, std::size_t rows, std::size_t cols, const double k[3][3]) {
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = -1; i <= 1; ++i) {
        for (int j = -1; j <= 1; ++j) {
          const long rr = static_cast<long>(r) + i, cc = static_cast<long>(c) + j;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) continue;
          s += k[i + 1][j + 1] * img[static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc)];
        }
      }
      out[r * cols + c] = s;
    }
  }
  return out;
}

// F x F box average (zero padded, 'same' alignment) sampled every F pixels.
std::vector<double> box_downsample(const std::vector<double>& img, std::size_t rows, std::size_t cols, std::size_t f,
                                   std::size_t& out_rows, std::size_t& out_cols) {
  out_rows = (rows + f - 1) / f;
  out_cols = (cols + f - 1) / f;
  if (f == 1) return img;
  std::vector<double> out(out_rows * out_cols);
  const long half = static_cast<long>(f / 2);
  const double norm = 1.0 / static_cast<double>(f * f);
  for (std::size_t r = 0; r < out_rows; ++r) {
    for (std::size_t c = 0; c < out_cols; ++c) {
      double s = 0.0;
      for (long a = 0; a < static_cast<long>(f); ++a) {
        const long rr = static_cast<long>(r * f) + half - a;
        if (rr < 0 || rr >= static_cast<long>(rows)) continue;
        for (long b = 0; b < static_cast<long>(f); ++b) {
          const long cc = static_cast<long>(c * f) + half - b;
          if (cc < 0 || cc >= static_cast<long>(cols)) continue;
          s += img[static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc)];
        }
      }
      out[r * out_cols + c] = s * norm;
    }
  }
  return out;
}

}  // namespace

std::vector<double> phase_congruency(const std::vector<double>& image, std::size_t rows, std::size_t cols) {
  constexpr int kScales = 4, kOrients = 4;
  constexpr double kMinWavelength = 6.0, kMult = 2.0, kSigmaOnf = 0.55, kDThetaOnSigma = 1.2;
  constexpr double kNoiseK = 2.0, kEpsilon = 1e-4;
  constexpr double kLowpassCutoff = 0.45;
  constexpr int kLowpassOrder = 15;
  const double theta_sigma = std::numbers::pi / kOrients / kDThetaOnSigma;
  const std::size_t n = rows * cols;
  if (image.size() != n) throw ShapeError("phase_congruency: buffer size does not match dims");

  const std::vector<double> fx = frequency_axis(cols), fy = frequency_axis(rows);
  std::vector<double> radius(n), sin_t(n), cos_t(n), lowpass(n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      const double rad = std::hypot(fx[c], fy[r]);
      const double theta = std::atan2(-fy[r], fx[c]);
      lowpass[i] = 1.0 / (1.0 + std::pow(rad / kLowpassCutoff, 2 * kLowpassOrder));
      radius[i] = rad;
      sin_t[i] = std::sin(theta);
      cos_t[i] = std::cos(theta);
    }
  }
  radius[0] = 1.0;  // avoid log(0) at DC; the filters zero it anyway

  std::vector<std::vector<double>> log_gabor(kScales, std::vector<double>(n));
  const double log_sigma2 = 2.0 * std::log(kSigmaOnf) * std::log(kSigmaOnf);
  for (int s = 0; s < kScales; ++s) {
    const double fo = 1.0 / (kMinWavelength * std::pow(kMult, s));
    for (std::size_t i = 0; i < n; ++i) {
      const double l = std::log(radius[i] / fo);
      log_gabor[s][i] = std::exp(-l * l / log_sigma2) * lowpass[i];
    }
    log_gabor[s][0] = 0.0;
  }

  Fft2d fft(rows, cols);
  auto& buf = fft.buffer();
  for (std::size_t i = 0; i < n; ++i) buf[i] = image[i];
  fft.forward();
  const std::vector<std::complex<double>> image_fft = buf;

  std::vector<double> energy_all(n, 0.0), an_all(n, 0.0);
  std::vector<double> spread(n), filter(n);
  std::vector<std::vector<std::complex<double>>> eo(kScales, std::vector<std::complex<double>>(n));
  std::vector<std::vector<double>> ifft_filter(kScales, std::vector<double>(n));
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  for (int o = 0; o < kOrients; ++o) {
    const double angle = o * std::numbers::pi / kOrients;
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (std::size_t i = 0; i < n; ++i) {
      const double ds = sin_t[i] * ca - cos_t[i] * sa;
      const double dc = cos_t[i] * ca + sin_t[i] * sa;
      const double dtheta = std::abs(std::atan2(ds, dc));
      spread[i] = std::exp(-dtheta * dtheta / (2.0 * theta_sigma * theta_sigma));
    }

    std::vector<double> sum_e(n, 0.0), sum_o(n, 0.0), sum_an(n, 0.0);
    double em_n = 0.0;
    for (int s = 0; s < kScales; ++s) {
      for (std::size_t i = 0; i < n; ++i) filter[i] = log_gabor[s][i] * spread[i];
      if (s == 0) {
        for (double f : filter) em_n += f * f;
      }
      for (std::size_t i = 0; i < n; ++i) buf[i] = filter[i];
      fft.inverse();
      for (std::size_t i = 0; i < n; ++i) ifft_filter[s][i] = buf[i].real() * sqrt_n;

      for (std::size_t i = 0; i < n; ++i) buf[i] = image_fft[i] * filter[i];
      fft.inverse();
      eo[s] = buf;
      for (std::size_t i = 0; i < n; ++i) {
        sum_an[i] += std::abs(buf[i]);
        sum_e[i] += buf[i].real();
        sum_o[i] += buf[i].imag();
      }
    }

    std::vector<double> energy(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double x_energy = std::hypot(sum_e[i], sum_o[i]) + kEpsilon;
      const double mean_e = sum_e[i] / x_energy, mean_o = sum_o[i] / x_energy;
      for (int s = 0; s < kScales; ++s) {
        const double e = eo[s][i].real(), od = eo[s][i].imag();
        energy[i] += e * mean_e + od * mean_o - std::abs(e * mean_o - od * mean_e);
      }
    }

    // Noise threshold from the smallest-scale response statistics.
    std::vector<double> e2(n);
    for (std::size_t i = 0; i < n; ++i) e2[i] = std::norm(eo[0][i]);
    const double mean_e2n = -median(std::move(e2)) / std::log(0.5);
    const double noise_power = mean_e2n / em_n;
    double sum_an2 = 0.0, sum_aiaj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int si = 0; si < kScales; ++si) {
        sum_an2 += ifft_filter[si][i] * ifft_filter[si][i];
        for (int sj = si + 1; sj < kScales; ++sj) sum_aiaj += ifft_filter[si][i] * ifft_filter[sj][i];
      }
    }
    const double noise_energy2 = 2.0 * noise_power * sum_an2 + 4.0 * noise_power * sum_aiaj;
    const double tau = std::sqrt(noise_energy2 / 2.0);
    const double noise_mean = tau * std::sqrt(std::numbers::pi / 2.0);
    const double noise_sigma = std::sqrt((2.0 - std::numbers::pi / 2.0) * tau * tau);
    const double threshold = (noise_mean + kNoiseK * noise_sigma) / 1.7;

    for (std::size_t i = 0; i < n; ++i) {
      energy_all[i] += std::max(energy[i] - threshold, 0.0);
      an_all[i] += sum_an[i];
    }
  }

  std::vector<double> pc(n);
  for (std::size_t i = 0; i < n; ++i) pc[i] = energy_all[i] / (an_all[i] + kEpsilon);
  return pc;
}

double fsim(const LdrImage& a, const LdrImage& b) {
  require_same_dims(a, b, "fsim");
  if (a.width < 32 || a.height < 32) {
    throw ShapeError("fsim: image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " is smaller than the 32x32 the filter bank needs");
  }
  constexpr double kT1 = 0.85, kT2 = 160.0;
  // Luma on the 0..255 scale the gradient constant is calibrated for.
  auto prepare = [](const LdrImage& img) {
    std::vector<double> y = luma(img);
    for (double& v : y) v *= 255.0;
    return y;
  };
  const std::size_t f =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::min(a.width, a.height) / 256.0)));
  std::size_t rows = 0, cols = 0;
  const std::vector<double> y1 = box_downsample(prepare(a), a.height, a.width, f, rows, cols);
  const std::vector<double> y2 = box_downsample(prepare(b), a.height, a.width, f, rows, cols);

  const std::vector<double> pc1 = phase_congruency(y1, rows, cols);
  const std::vector<double> pc2 = phase_congruency(y2, rows, cols);

  static constexpr double kDx[3][3] = {{3 / 16.0, 0, -3 / 16.0}, {10 / 16.0, 0, -10 / 16.0}, {3 / 16.0, 0, -3 / 16.0}};
  static constexpr double kDy[3][3] = {{3 / 16.0, 10 / 16.0, 3 / 16.0}, {0, 0, 0}, {-3 / 16.0, -10 / 16.0, -3 / 16.0}};
  const auto gx1 = filter3x3(y1, rows, cols, kDx), gy1 = filter3x3(y1, rows, cols, kDy);
  const auto gx2 = filter3x3(y2, rows, cols, kDx), gy2 = filter3x3(y2, rows, cols, kDy);

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rows * cols; ++i) {
    const double g1 = std::hypot(gx1[i], gy1[i]), g2 = std::hypot(gx2[i], gy2[i]);
    const double pc_sim = (2.0 * pc1[i] * pc2[i] + kT1) / (pc1[i] * pc1[i] + pc2[i] * pc2[i] + kT1);
    const double g_sim = (2.0 * g1 * g2 + kT2) / (g1 * g1 + g2 * g2 + kT2);
    const double pcm = std::max(pc1[i], pc2[i]);
    num += g_sim * pc_sim * pcm;
    den += pcm;
  }
  // Two featureless images carry no structure to disagree about.
  if (den == 0.0) return 1.0;
  return num / den;
}

// ---------------------------------------------------------------------------
// Reports

ImageMetrics evaluate_pair(const LdrImage& prediction, const LdrImage& reference) {
  ImageMetrics m;
  m.psnr = psnr(prediction, reference);
  m.ssim = ssim(prediction, reference);
  m.fsim = fsim(prediction, reference);
  return m;
}

void MetricReport::finalize() {
  double p = 0, s = 0, f = 0;
  evaluated = 0;
  for (const auto& m : per_image) {
    if (m.error) continue;
    p += m.psnr;
    s += m.ssim;
    f += m.fsim;
    ++evaluated;
  }
  const double k = evaluated ? static_cast<double>(evaluated) : 1.0;
  mean_psnr = evaluated ? p / k : 0.0;
  mean_ssim = evaluated ? s / k : 0.0;
  mean_fsim = evaluated ? f / k : 0.0;
}

json MetricReport::to_json() const {
  json entries = json::array();
  for (const auto& m : per_image) {
    if (m.error) {
      entries.push_back(json{{"path", m.path}, {"error", *m.error}});
    } else {
      entries.push_back(json{{"path", m.path}, {"psnr", m.psnr}, {"ssim", m.ssim}, {"fsim", m.fsim}});
    }
  }
  return json{{"per_image", entries},
              {"mean", {{"psnr", mean_psnr}, {"ssim", mean_ssim}, {"fsim", mean_fsim}}},
              {"evaluated", evaluated},
              {"failed", per_image.size() - evaluated}};
}

}  // namespace drht
