#include "drht/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

namespace drht {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename Tag>
RgbImage<Tag> crop(const RgbImage<Tag>& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  if (x0 + w > img.width || y0 + h > img.height) {
    throw InvalidArgument("crop window " + std::to_string(w) + "x" + std::to_string(h) + " at (" +
                          std::to_string(x0) + "," + std::to_string(y0) + ") exceeds " + std::to_string(img.width) +
                          "x" + std::to_string(img.height) + " image");
  }
  RgbImage<Tag> out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    const float* src = img.pixels.data() + ((y0 + y) * img.width + x0) * 3;
    std::copy_n(src, w * 3, out.pixels.data() + y * w * 3);
  }
  return out;
}

template <typename Tag>
RgbImage<Tag> flip_horizontal(const RgbImage<Tag>& img) {
  RgbImage<Tag> out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

template <typename T, typename Tag>
Tensor<T> images_to_tensor(std::span<const RgbImage<Tag>* const> images) {
  if (images.empty()) throw InvalidArgument("cannot stack zero images");
  const std::size_t w = images.front()->width, h = images.front()->height;
  Tensor<T> t({images.size(), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = *images[n];
    if (img.width != w || img.height != h) {
      throw ShapeError("image " + std::to_string(n) + " is " + std::to_string(img.width) + "x" +
                       std::to_string(img.height) + ", expected " + std::to_string(w) + "x" + std::to_string(h));
    }
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) t.at(n, c, y, x) = static_cast<T>(img.at(x, y, c));
  }
  return t;
}

template <typename Tag, typename T>
RgbImage<Tag> tensor_to_image(const Tensor<T>& t, std::size_t n) {
  if (t.rank() != 4 || t.dim(1) != 3 || n >= t.dim(0)) {
    throw ShapeError("expected an [N,3,H,W] tensor with N > " + std::to_string(n) + ", got " + to_string(t.shape()));
  }
  RgbImage<Tag> img(t.dim(3), t.dim(2));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) img.at(x, y, c) = static_cast<float>(t.at(n, c, y, x));
  return img;
}

// ---------------------------------------------------------------------------
// Scene generation

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

struct Wave {
  double amp, fx, fy, phase;
};

}  // namespace

HdrImage generate_scene(std::uint64_t seed, std::size_t width, std::size_t height, double s_max) {
  if (width < 16 || height < 16) {
    throw InvalidArgument("scene must be at least 16x16, got " + std::to_string(width) + "x" + std::to_string(height));
  }
  if (!(s_max > 1.0)) throw InvalidArgument("s_max must exceed 1");
  std::mt19937_64 rng(seed);
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  const double min_dim = std::min(w, h);

  const double horizon = h * uniform(rng, 0.35, 0.6);
  const double sky_top = uniform(rng, 2.0, 5.0);
  const double sky_bottom = uniform(rng, 0.6, 1.4);
  const double sky_tint[3] = {uniform(rng, 0.75, 0.95), uniform(rng, 0.9, 1.05), uniform(rng, 1.0, 1.3)};
  const double ground_level = uniform(rng, 0.002, 0.012);
  const double ground_tint[3] = {uniform(rng, 0.8, 1.2), uniform(rng, 0.8, 1.2), uniform(rng, 0.8, 1.2)};

  // Mid-frequency texture: periods of 4..24 pixels, total amplitude 0.5.
  std::vector<Wave> waves(4);
  for (auto& wv : waves) {
    const double period = uniform(rng, 4.0, 24.0);
    const double angle = uniform(rng, 0.0, std::numbers::pi);
    wv = {0.125, std::cos(angle) / period, std::sin(angle) / period, uniform(rng, 0.0, 2.0 * std::numbers::pi)};
  }

  // Mid-tone buildings standing on the horizon.
  struct Box {
    double x0, x1, top, level;
  };
  std::vector<Box> boxes(static_cast<std::size_t>(uniform(rng, 2.0, 5.999)));
  for (auto& b : boxes) {
    const double bw = w * uniform(rng, 0.08, 0.25);
    b.x0 = uniform(rng, 0.0, w - bw);
    b.x1 = b.x0 + bw;
    b.top = horizon - h * uniform(rng, 0.05, 0.25);
    b.level = uniform(rng, 0.03, 0.4);
  }

  struct Blob {
    double cx, cy, r, peak;
  };
  std::vector<Blob> blobs(static_cast<std::size_t>(uniform(rng, 1.0, 3.999)));
  for (auto& b : blobs) {
    b.cx = uniform(rng, 0.1 * w, 0.9 * w);
    b.cy = uniform(rng, 0.05 * h, horizon);
    b.r = min_dim * uniform(rng, 0.04, 0.12);
    b.peak = s_max * uniform(rng, 0.4, 1.0);
  }

  HdrImage img(width, height);
  for (std::size_t yi = 0; yi < height; ++yi) {
    const double y = static_cast<double>(yi) + 0.5;
    for (std::size_t xi = 0; xi < width; ++xi) {
      const double x = static_cast<double>(xi) + 0.5;
      double texture = 1.0;
      for (const auto& wv : waves) texture += wv.amp * std::sin(2.0 * std::numbers::pi * (wv.fx * x + wv.fy * y) + wv.phase);

      double base[3];
      if (y < horizon) {
        const double t = y / horizon;
        const double sky = sky_top + (sky_bottom - sky_top) * t;
        for (int c = 0; c < 3; ++c) base[c] = sky * sky_tint[c] * (0.85 + 0.3 * (texture - 1.0));
      } else {
        // Foreground darkens towards the bottom edge.
        const double t = (y - horizon) / (h - horizon);
        const double level = ground_level * (1.0 - 0.7 * t);
        for (int c = 0; c < 3; ++c) base[c] = level * ground_tint[c] * texture;
      }
      for (const auto& b : boxes) {
        if (x >= b.x0 && x < b.x1 && y >= b.top && y < horizon) {
          for (int c = 0; c < 3; ++c) base[c] = b.level * texture;
        }
      }
      double glow = 0.0;
      for (const auto& b : blobs) {
        const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
        glow += b.peak * std::exp(-d2 / (2.0 * b.r * b.r));
      }
      for (int c = 0; c < 3; ++c) {
        img.at(xi, yi, c) = static_cast<float>(std::clamp(base[c] + glow, 0.0, s_max));
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Exposure and tone mapping

void ExposureSimulator::validate() const {
  if (!(crf_gamma > 0.0)) throw InvalidArgument("crf_gamma must be positive");
  if (!(ev_min <= ev_max) || ev_min < -6.0 || ev_max > 3.0) {
    throw InvalidArgument("ev range must lie within [-6, 3]");
  }
  if (!(contrast_min > 0.0) || !(contrast_min <= contrast_max)) {
    throw InvalidArgument("contrast range must be positive and ordered");
  }
}

LdrImage simulate_exposure(const HdrImage& scene, double ev, double contrast, const ExposureSimulator& sim) {
  if (ev < sim.ev_min || ev > sim.ev_max) {
    throw InvalidArgument("ev " + std::to_string(ev) + " outside [" + std::to_string(sim.ev_min) + ", " +
                          std::to_string(sim.ev_max) + "]");
  }
  const double exposure = std::exp2(ev);
  LdrImage out(scene.width, scene.height);
  for (std::size_t i = 0; i < scene.pixels.size(); ++i) {
    const double v = std::pow(static_cast<double>(scene.pixels[i]) * exposure, sim.crf_gamma) * contrast;
    out.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

LdrImage simulate_exposure(const HdrImage& scene, double ev, const ExposureSimulator& sim, std::mt19937_64& rng) {
  const double contrast = uniform(rng, sim.contrast_min, sim.contrast_max);
  return simulate_exposure(scene, ev, contrast, sim);
}

LdrImage reference_ldr(const HdrImage& scene, const DomainTransferParams& p) {
  const double lo = p.log_floor();
  const double span = p.log_ceiling() - lo;
  LdrImage out(scene.width, scene.height);
  for (std::size_t i = 0; i < scene.pixels.size(); ++i) {
    const double v = (std::log(static_cast<double>(scene.pixels[i]) + p.delta) - lo) / span;
    out.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

std::size_t patches_per_scene(const DatasetConfig& cfg) {
  if (cfg.patch_width == 0 || cfg.patch_height == 0) throw InvalidArgument("patch dims must be positive");
  if (cfg.patch_width > cfg.scene_width || cfg.patch_height > cfg.scene_height) {
    throw InvalidArgument("patch " + std::to_string(cfg.patch_width) + "x" + std::to_string(cfg.patch_height) +
                          " is larger than the " + std::to_string(cfg.scene_width) + "x" +
                          std::to_string(cfg.scene_height) + " scene");
  }
  return (cfg.scene_width / cfg.patch_width) * (cfg.scene_height / cfg.patch_height);
}

std::vector<TrainingTriplet> make_triplets(const HdrImage& scene, double ev, double contrast,
                                           const DatasetConfig& cfg) {
  DatasetConfig local = cfg;
  local.scene_width = scene.width;
  local.scene_height = scene.height;
  patches_per_scene(local);
  const LdrImage input = simulate_exposure(scene, ev, contrast, cfg.sim);
  const LdrImage target = reference_ldr(scene, cfg.transfer);
  std::vector<TrainingTriplet> out;
  for (std::size_t y = 0; y + cfg.patch_height <= scene.height; y += cfg.patch_height) {
    for (std::size_t x = 0; x + cfg.patch_width <= scene.width; x += cfg.patch_width) {
      out.push_back({crop(input, x, y, cfg.patch_width, cfg.patch_height),
                     crop(scene, x, y, cfg.patch_width, cfg.patch_height),
                     crop(target, x, y, cfg.patch_width, cfg.patch_height), ev});
    }
  }
  return out;
}

std::vector<TrainingTriplet> make_dataset(std::size_t n_scenes, const DatasetConfig& cfg) {
  cfg.sim.validate();
  cfg.transfer.validate();
  patches_per_scene(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<TrainingTriplet> out;
  for (std::size_t i = 0; i < n_scenes; ++i) {
    const std::uint64_t scene_seed = rng();
    const double ev = uniform(rng, cfg.sim.ev_min, cfg.sim.ev_max);
    const double contrast = uniform(rng, cfg.sim.contrast_min, cfg.sim.contrast_max);
    const HdrImage scene = generate_scene(scene_seed, cfg.scene_width, cfg.scene_height, cfg.transfer.s_max);
    auto patches = make_triplets(scene, ev, contrast, cfg);
    std::move(patches.begin(), patches.end(), std::back_inserter(out));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Netpbm-style headers

namespace {

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_all(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

// Whitespace-separated header tokens; '#' starts a comment to end of line.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  std::string token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) fail("unexpected end of header");
    return bytes_.substr(start, pos_ - start);
  }

  std::size_t dimension(const char* what) {
    const std::string t = token();
    std::size_t v = 0;
    std::size_t used = 0;
    try {
      v = std::stoul(t, &used);
    } catch (const std::exception&) {
      fail(std::string("bad ") + what + " '" + t + "'");
    }
    if (used != t.size() || v == 0) fail(std::string("bad ") + what + " '" + t + "'");
    return v;
  }

  double number(const char* what) {
    const std::string t = token();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      fail(std::string("bad ") + what + " '" + t + "'");
    }
    if (used != t.size() || !std::isfinite(v)) fail(std::string("bad ") + what + " '" + t + "'");
    return v;
  }

  /// Consumes the single whitespace byte that ends the header.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail("header is not terminated by whitespace");
    }
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw MalformedHeaderError(path_.string() + ": malformed header: " + msg);
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

HdrImage read_pfm(const fs::path& path) {
  const std::string bytes = read_all(path);
  HeaderReader header(bytes, path);
  const std::string magic = header.token();
  if (magic == "Pf") throw UnsupportedFormatError(path.string() + ": greyscale PFM is not supported");
  if (magic != "PF") header.fail("expected 'PF', got '" + magic + "'");
  const std::size_t w = header.dimension("width");
  const std::size_t h = header.dimension("height");
  const double scale = header.number("scale");
  if (scale == 0.0) header.fail("scale must be non-zero");
  const std::size_t offset = header.payload_offset();

  const std::size_t need = w * h * 3 * 4;
  if (bytes.size() - offset < need) {
    throw TruncatedPayloadError(path.string() + ": payload holds " + std::to_string(bytes.size() - offset) +
                                " bytes, expected " + std::to_string(need));
  }
  const bool little = scale < 0.0;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  HdrImage img(w, h);
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t y = h - 1 - row;  // stored bottom to top
    for (std::size_t i = 0; i < w * 3; ++i, p += 4) {
      const std::uint32_t bits = little ? (std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 |
                                           std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24)
                                        : (std::uint32_t{p[3]} | std::uint32_t{p[2]} << 8 |
                                           std::uint32_t{p[1]} << 16 | std::uint32_t{p[0]} << 24);
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) {
        throw InvalidPixelError(path.string() + ": non-finite value at pixel (" + std::to_string(i / 3) + "," +
                                std::to_string(y) + ")");
      }
      if (v < 0.0f) {
        throw InvalidPixelError(path.string() + ": negative radiance at pixel (" + std::to_string(i / 3) + "," +
                                std::to_string(y) + ")");
      }
      img.pixels[y * w * 3 + i] = v;
    }
  }
  return img;
}

void write_pfm(const fs::path& path, const HdrImage& img) {
  if (img.empty()) throw InvalidArgument("cannot write an empty image to " + path.string());
  for (float v : img.pixels) {
    if (!std::isfinite(v) || v < 0.0f) throw InvalidPixelError("refusing to write invalid radiance to " + path.string());
  }
  std::string out = "PF\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
  out.reserve(out.size() + img.pixels.size() * 4);
  for (std::size_t row = 0; row < img.height; ++row) {
    const std::size_t y = img.height - 1 - row;
    for (std::size_t i = 0; i < img.width * 3; ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(img.pixels[y * img.width * 3 + i]);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
  }
  write_all(path, out);
}

LdrImage read_ppm(const fs::path& path) {
  const std::string bytes = read_all(path);
  HeaderReader header(bytes, path);
  const std::string magic = header.token();
  if (magic == "P3") throw UnsupportedFormatError(path.string() + ": ASCII PPM is not supported");
  if (magic != "P6") header.fail("expected 'P6', got '" + magic + "'");
  const std::size_t w = header.dimension("width");
  const std::size_t h = header.dimension("height");
  const std::size_t maxval = header.dimension("maxval");
  if (maxval != 255) {
    throw UnsupportedFormatError(path.string() + ": maxval " + std::to_string(maxval) + " is not supported (need 255)");
  }
  const std::size_t offset = header.payload_offset();
  const std::size_t need = w * h * 3;
  if (bytes.size() - offset < need) {
    throw TruncatedPayloadError(path.string() + ": payload holds " + std::to_string(bytes.size() - offset) +
                                " bytes, expected " + std::to_string(need));
  }
  LdrImage img(w, h);
  for (std::size_t i = 0; i < need; ++i) {
    img.pixels[i] = static_cast<float>(static_cast<unsigned char>(bytes[offset + i])) / 255.0f;
  }
  return img;
}

std::size_t write_ppm(const fs::path& path, const LdrImage& img) {
  if (img.empty()) throw InvalidArgument("cannot write an empty image to " + path.string());
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::size_t clamped = 0;
  for (float v : img.pixels) {
    if (!std::isfinite(v)) throw InvalidPixelError("refusing to write a non-finite value to " + path.string());
    if (v < 0.0f || v > 1.0f) ++clamped;
    const double q = std::round(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }
  write_all(path, out);
  return clamped;
}

// ---------------------------------------------------------------------------
// Manifest

void write_dataset(const fs::path& dir, const std::vector<TrainingTriplet>& triplets, const json& meta) {
  if (triplets.empty()) throw InvalidArgument("empty dataset requested");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json entries = json::array();
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "triplet_%05zu", i);
    const std::string input = std::string(stem) + "_input.ppm";
    const std::string hdr = std::string(stem) + "_hdr_gt.pfm";
    const std::string ldr = std::string(stem) + "_ldr_gt.ppm";
    write_ppm(dir / input, triplets[i].input);
    write_pfm(dir / hdr, triplets[i].hdr_gt);
    write_ppm(dir / ldr, triplets[i].ldr_gt);
    entries.push_back(json{{"input", input}, {"hdr_gt", hdr}, {"ldr_gt", ldr}, {"ev", triplets[i].ev}});
  }
  json manifest{{"format", "drht-dataset"}, {"version", 1}, {"meta", meta}, {"triplets", entries}};
  write_all(dir / "dataset.json", manifest.dump(2) + "\n");
}

std::vector<TrainingTriplet> load_dataset(const fs::path& dir_or_manifest) {
  const fs::path manifest_path =
      fs::is_directory(dir_or_manifest) ? dir_or_manifest / "dataset.json" : dir_or_manifest;
  const fs::path base = manifest_path.parent_path();
  json manifest;
  try {
    manifest = json::parse(read_all(manifest_path));
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": invalid dataset manifest: " + e.what());
  }
  std::vector<TrainingTriplet> out;
  try {
    for (const auto& e : manifest.at("triplets")) {
      TrainingTriplet t;
      t.input = read_ppm(base / e.at("input").get<std::string>());
      t.hdr_gt = read_pfm(base / e.at("hdr_gt").get<std::string>());
      t.ldr_gt = read_ppm(base / e.at("ldr_gt").get<std::string>());
      t.ev = e.at("ev").get<double>();
      if (t.input.width != t.hdr_gt.width || t.input.height != t.hdr_gt.height ||
          t.input.width != t.ldr_gt.width || t.input.height != t.ldr_gt.height) {
        throw ShapeError("triplet " + std::to_string(out.size()) + " has mismatched image sizes");
      }
      out.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": invalid dataset manifest: " + e.what());
  }
  if (out.empty()) throw InvalidArgument(manifest_path.string() + ": dataset is empty");
  return out;
}

#define DRHT_INSTANTIATE_TAG(Tag)                                                                           \
  template RgbImage<Tag> crop(const RgbImage<Tag>&, std::size_t, std::size_t, std::size_t, std::size_t);   \
  template RgbImage<Tag> flip_horizontal(const RgbImage<Tag>&);                                              \
  template Tensor<float> images_to_tensor<float, Tag>(std::span<const RgbImage<Tag>* const>);               \
  template Tensor<double> images_to_tensor<double, Tag>(std::span<const RgbImage<Tag>* const>);             \
  template RgbImage<Tag> tensor_to_image<Tag, float>(const Tensor<float>&, std::size_t);                    \
  template RgbImage<Tag> tensor_to_image<Tag, double>(const Tensor<double>&, std::size_t);
DRHT_INSTANTIATE_TAG(HdrTag)
DRHT_INSTANTIATE_TAG(LdrTag)
#undef DRHT_INSTANTIATE_TAG

}  // namespace drht
