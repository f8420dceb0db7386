#pragma once

// Synthetic scenes, exposure corruption, reference tone mapping, triplet
// datasets and the PFM/PPM file formats.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "drht/model.hpp"
#include "drht/tensor.hpp"

namespace drht {

struct HdrTag {};
struct LdrTag {};

/// Interleaved RGB image, rows top to bottom. The tag keeps radiance and
/// display-referred images from being mixed up.
template <typename Tag>
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;  // (y * width + x) * 3 + c

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), pixels(w * h * 3, fill) {}

  float& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  float at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }
  bool empty() const { return pixels.empty(); }
  bool operator==(const RgbImage&) const = default;
};

/// Linear radiance, finite and >= 0.
using HdrImage = RgbImage<HdrTag>;
/// Display values in [0, 1].
using LdrImage = RgbImage<LdrTag>;

template <typename Tag>
RgbImage<Tag> crop(const RgbImage<Tag>& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h);

template <typename Tag>
RgbImage<Tag> flip_horizontal(const RgbImage<Tag>& img);

/// Stacks equally sized images into an [N, 3, H, W] tensor.
template <typename T, typename Tag>
Tensor<T> images_to_tensor(std::span<const RgbImage<Tag>* const> images);

template <typename T, typename Tag>
Tensor<T> image_to_tensor(const RgbImage<Tag>& img) {
  const RgbImage<Tag>* one[] = {&img};
  return images_to_tensor<T, Tag>(one);
}

/// Image `n` of an [N, 3, H, W] tensor.
template <typename Tag, typename T>
RgbImage<Tag> tensor_to_image(const Tensor<T>& t, std::size_t n = 0);

/// Procedural radiance field: sky gradient, bright light blobs, mid-frequency
/// texture and dark structured foreground. Values lie in [0, s_max].
HdrImage generate_scene(std::uint64_t seed, std::size_t width, std::size_t height, double s_max);

/// Camera model: I = clip01((S * 2^ev)^crf_gamma * contrast).
struct ExposureSimulator {
  double crf_gamma = 1.0 / 2.2;
  double ev_min = -6.0;
  double ev_max = 3.0;
  double contrast_min = 0.8;
  double contrast_max = 1.2;

  void validate() const;
};

LdrImage simulate_exposure(const HdrImage& scene, double ev, double contrast, const ExposureSimulator& sim);

/// Draws the contrast factor from `rng`.
LdrImage simulate_exposure(const HdrImage& scene, double ev, const ExposureSimulator& sim, std::mt19937_64& rng);

/// Well-exposed target: normalized ln(S + delta), the same law domain_transfer applies.
LdrImage reference_ldr(const HdrImage& scene, const DomainTransferParams& p);

struct TrainingTriplet {
  LdrImage input;
  HdrImage hdr_gt;
  LdrImage ldr_gt;
  double ev = 0.0;
};

struct DatasetConfig {
  std::size_t scene_width = 128;
  std::size_t scene_height = 64;
  std::size_t patch_width = 64;
  std::size_t patch_height = 64;
  std::uint64_t seed = 1;
  ExposureSimulator sim;
  DomainTransferParams transfer;
};

/// Number of non-overlapping patches cut from one scene.
std::size_t patches_per_scene(const DatasetConfig& cfg);

/// Corrupts one scene and tiles input, radiance and target identically.
std::vector<TrainingTriplet> make_triplets(const HdrImage& scene, double ev, double contrast,
                                           const DatasetConfig& cfg);

/// Scenes are generated from seeds derived from cfg.seed; ev is uniform in the
/// simulator's range. Throws InvalidArgument if a patch exceeds the scene.
std::vector<TrainingTriplet> make_dataset(std::size_t n_scenes, const DatasetConfig& cfg);

HdrImage read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const HdrImage& img);

LdrImage read_ppm(const std::filesystem::path& path);
/// Quantizes round(v * 255); returns how many values had to be clamped into [0, 1].
std::size_t write_ppm(const std::filesystem::path& path, const LdrImage& img);

/// Writes every triplet as PPM/PFM files plus a dataset.json manifest.
void write_dataset(const std::filesystem::path& dir, const std::vector<TrainingTriplet>& triplets,
                   const nlohmann::json& meta = nlohmann::json::object());

/// Loads a dataset from its directory or from the manifest path itself.
std::vector<TrainingTriplet> load_dataset(const std::filesystem::path& dir_or_manifest);

}  // namespace drht
