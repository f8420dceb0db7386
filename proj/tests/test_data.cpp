#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "drht/data.hpp"
#include "test_util.hpp"

namespace drht {
namespace {

using testing::read_bytes;
using testing::TempDir;

void write_raw(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

HdrImage ramp_scene(std::size_t w, std::size_t h, double s_max) {
  HdrImage s(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        s.at(x, y, c) = static_cast<float>(s_max * static_cast<double>((y * w + x) * 3 + c) / (w * h * 3));
      }
  return s;
}

TEST(Scene, DeterministicAndBounded) {
  const auto a = generate_scene(5, 96, 48, 64.0);
  const auto b = generate_scene(5, 96, 48, 64.0);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, generate_scene(6, 96, 48, 64.0));
  for (float v : a.pixels) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 64.0f);
  }
  EXPECT_THROW(generate_scene(1, 15, 32, 64.0), InvalidArgument);
}

TEST(Scene, BothExposureFailureModesPresent) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto s = generate_scene(seed, 128, 64, 64.0);
    std::size_t bright = 0, dark = 0;
    const std::size_t n = s.width * s.height;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = (s.pixels[3 * i] + s.pixels[3 * i + 1] + s.pixels[3 * i + 2]) / 3.0;
      bright += m > 1.0;
      dark += m < 0.01;
    }
    EXPECT_GE(bright, n / 100) << "seed " << seed;
    EXPECT_GE(dark, n / 100) << "seed " << seed;
  }
}

TEST(Exposure, ClosedFormCases) {
  const ExposureSimulator sim;
  const HdrImage ones(4, 4, 1.0f);
  for (float v : simulate_exposure(ones, 0.0, 1.0, sim).pixels) EXPECT_EQ(v, 1.0f);

  const HdrImage s(2, 2, 3.2f);
  const auto dim = simulate_exposure(s, -6.0, 1.0, sim);
  EXPECT_NEAR(dim.pixels[0], std::pow(3.2 / 64.0, 1.0 / 2.2), 1e-6);

  const auto clipped = simulate_exposure(HdrImage(2, 2, 0.5f), 1.0, 1.2, sim);
  for (float v : clipped.pixels) EXPECT_EQ(v, 1.0f);
  EXPECT_THROW(simulate_exposure(s, -6.5, 1.0, sim), InvalidArgument);
  EXPECT_THROW(simulate_exposure(s, 3.5, 1.0, sim), InvalidArgument);
}

TEST(Exposure, MonotoneInRadianceAndEv) {
  const ExposureSimulator sim;
  HdrImage s(64, 1);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t c = 0; c < 3; ++c) s.at(i, 0, c) = static_cast<float>(std::pow(1.25, static_cast<double>(i)) * 1e-4);
  float prev_ev_row = -1.0f;
  for (double ev = -6.0; ev <= 3.0; ev += 0.5) {
    const auto img = simulate_exposure(s, ev, 1.0, sim);
    for (std::size_t i = 1; i < 64; ++i) EXPECT_GE(img.at(i, 0, 0), img.at(i - 1, 0, 0));
    EXPECT_GE(img.at(10, 0, 0), prev_ev_row);
    prev_ev_row = img.at(10, 0, 0);
  }
}

TEST(ReferenceLdr, BoundsMonotoneAndSharedWithTransfer) {
  const DomainTransferParams p;
  HdrImage s(3, 1);
  s.at(1, 0, 0) = 64.0f;
  s.at(2, 0, 0) = 1.0f;
  const auto l = reference_ldr(s, p);
  EXPECT_EQ(l.at(0, 0, 0), 0.0f);
  EXPECT_NEAR(l.at(1, 0, 0), 1.0f, 1e-7);

  const auto scene = generate_scene(3, 64, 32, p.s_max);
  const auto ref = reference_ldr(scene, p);
  const auto y = image_to_tensor<double>(scene);
  const auto via_transfer = domain_transfer(gamma_compress(y, p), p);
  const auto ref_t = image_to_tensor<double>(ref);
  double worst = 0.0;
  for (std::size_t i = 0; i < ref_t.size(); ++i) worst = std::max(worst, std::abs(ref_t[i] - via_transfer[i]));
  EXPECT_LT(worst, 1e-6);

  std::vector<float> sorted = scene.pixels;
  std::vector<std::size_t> order(sorted.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scene.pixels[a] < scene.pixels[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_LE(ref.pixels[order[i - 1]], ref.pixels[order[i]]);
}

TEST(Dataset, TilingCount) {
  DatasetConfig cfg;
  cfg.scene_width = 128;
  cfg.scene_height = 64;
  EXPECT_EQ(make_dataset(1, cfg).size(), 2u);
  EXPECT_EQ(make_dataset(3, cfg).size(), 6u);
  cfg.patch_width = 32;
  cfg.patch_height = 32;
  EXPECT_EQ(patches_per_scene(cfg), 8u);
  cfg.patch_width = 256;
  EXPECT_THROW(make_dataset(1, cfg), InvalidArgument);
}

TEST(Dataset, PatchesAreAligned) {
  DatasetConfig cfg;
  cfg.patch_width = 32;
  cfg.patch_height = 16;
  const auto scene = ramp_scene(96, 48, 64.0);
  const auto triplets = make_triplets(scene, -2.0, 1.1, cfg);
  ASSERT_EQ(triplets.size(), 9u);
  const auto input = simulate_exposure(scene, -2.0, 1.1, cfg.sim);
  const auto target = reference_ldr(scene, cfg.transfer);
  std::size_t k = 0;
  for (std::size_t y = 0; y < 48; y += 16) {
    for (std::size_t x = 0; x < 96; x += 32, ++k) {
      EXPECT_EQ(triplets[k].hdr_gt, crop(scene, x, y, 32, 16));
      EXPECT_EQ(triplets[k].input, crop(input, x, y, 32, 16));
      EXPECT_EQ(triplets[k].ldr_gt, crop(target, x, y, 32, 16));
      EXPECT_EQ(triplets[k].ev, -2.0);
    }
  }
}

TEST(Dataset, DeterministicAndInRange) {
  DatasetConfig cfg;
  const auto a = make_dataset(3, cfg);
  const auto b = make_dataset(3, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].input, b[i].input);
    EXPECT_EQ(a[i].hdr_gt, b[i].hdr_gt);
    EXPECT_GE(a[i].ev, -6.0);
    EXPECT_LE(a[i].ev, 3.0);
  }
}

TEST(Dataset, WriteAndLoadRoundTrip) {
  TempDir dir("ds");
  DatasetConfig cfg;
  cfg.scene_width = 32;
  cfg.scene_height = 16;
  cfg.patch_width = 16;
  cfg.patch_height = 16;
  const auto t = make_dataset(2, cfg);
  write_dataset(dir.path(), t, {{"note", "x"}});
  const auto back = load_dataset(dir.path());
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(back[i].hdr_gt, t[i].hdr_gt);
    EXPECT_EQ(back[i].ev, t[i].ev);
    for (std::size_t j = 0; j < t[i].input.pixels.size(); ++j) {
      EXPECT_LE(std::abs(back[i].input.pixels[j] - t[i].input.pixels[j]), 1.0 / 510.0 + 1e-7);
    }
  }
  EXPECT_EQ(load_dataset(dir / "dataset.json").size(), t.size());
  EXPECT_THROW(write_dataset(dir / "empty", {}), InvalidArgument);
}

// ---------------------------------------------------------------------------

TEST(Pfm, RoundTripIsBitExact) {
  TempDir dir("pfm");
  auto img = testing::random_image<HdrTag>(7, 5, 3, 0.0, 64.0);
  img.at(0, 0, 0) = 0.0f;
  img.at(1, 0, 0) = 1e-30f;
  img.at(2, 0, 0) = 3.4e38f;
  write_pfm(dir / "a.pfm", img);
  EXPECT_EQ(read_pfm(dir / "a.pfm"), img);
}

TEST(Pfm, HeaderAndRowOrder) {
  TempDir dir("pfm");
  HdrImage img(64, 128);
  img.at(0, 127, 0) = 5.0f;  // bottom-left pixel, stored first
  write_pfm(dir / "h.pfm", img);
  const auto bytes = read_bytes(dir / "h.pfm");
  const std::string header = "PF\n64 128\n-1.0\n";
  ASSERT_GE(bytes.size(), header.size() + 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + header.size()), header);
  EXPECT_EQ(bytes.size(), header.size() + 64 * 128 * 12);
  float first;
  std::memcpy(&first, bytes.data() + header.size(), 4);
  EXPECT_EQ(first, 5.0f);
}

TEST(Pfm, BigEndianFixture) {
  TempDir dir("pfm");
  // 2x2 image, rows bottom to top; pixel value = 10*y + x + channel/4 with y from the top.
  std::string bytes = "PF\n2 2\n1.0\n";
  for (int row = 1; row >= 0; --row)
    for (int x = 0; x < 2; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = static_cast<float>(10 * row + x) + static_cast<float>(c) / 4.0f;
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        for (int b = 3; b >= 0; --b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
      }
  write_raw(dir / "be.pfm", bytes);
  const auto img = read_pfm(dir / "be.pfm");
  ASSERT_EQ(img.width, 2u);
  ASSERT_EQ(img.height, 2u);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(img.at(x, y, c), 10.0f * y + x + c / 4.0f);
}

TEST(Pfm, DistinctErrorsForBadFiles) {
  TempDir dir("pfm");
  write_raw(dir / "hdr.pfm", "PX\n2 2\n-1.0\n");
  EXPECT_THROW(read_pfm(dir / "hdr.pfm"), MalformedHeaderError);
  write_raw(dir / "dims.pfm", "PF\n2 x\n-1.0\n");
  EXPECT_THROW(read_pfm(dir / "dims.pfm"), MalformedHeaderError);
  write_raw(dir / "short.pfm", "PF\n2 2\n-1.0\n" + std::string(20, '\0'));
  EXPECT_THROW(read_pfm(dir / "short.pfm"), TruncatedPayloadError);
  std::string nan_payload(48, '\0');
  const float nan = std::nanf("");
  std::memcpy(nan_payload.data() + 8, &nan, 4);
  write_raw(dir / "nan.pfm", "PF\n2 2\n-1.0\n" + nan_payload);
  EXPECT_THROW(read_pfm(dir / "nan.pfm"), InvalidPixelError);
  write_raw(dir / "grey.pfm", "Pf\n2 2\n-1.0\n" + std::string(16, '\0'));
  EXPECT_THROW(read_pfm(dir / "grey.pfm"), UnsupportedFormatError);
  EXPECT_THROW(read_pfm(dir / "missing.pfm"), IoError);
  HdrImage neg(1, 1, -1.0f);
  EXPECT_THROW(write_pfm(dir / "neg.pfm", neg), InvalidPixelError);
}

TEST(Ppm, QuantizationRule) {
  TempDir dir("ppm");
  LdrImage img(2, 1);
  img.pixels = {1.0f, 0.5f, 0.0f, 0.25f, 1.0f / 255.0f, 0.998f};
  EXPECT_EQ(write_ppm(dir / "q.ppm", img), 0u);
  const auto bytes = read_bytes(dir / "q.ppm");
  const std::string header = "P6\n2 1\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 6);
  const unsigned char expect[] = {255, 128, 0, 64, 1, 254};
  for (int i = 0; i < 6; ++i) EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + i]), expect[i]) << i;
  const auto back = read_ppm(dir / "q.ppm");
  EXPECT_EQ(back.pixels[0], 1.0f);
  EXPECT_FLOAT_EQ(back.pixels[1], 128.0f / 255.0f);
}

TEST(Ppm, RoundTripErrorBound) {
  TempDir dir("ppm");
  const auto img = testing::random_image<LdrTag>(33, 17, 4);
  write_ppm(dir / "r.ppm", img);
  const auto back = read_ppm(dir / "r.ppm");
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    EXPECT_LE(std::abs(static_cast<double>(back.pixels[i]) - img.pixels[i]), 1.0 / 510.0 + 1e-7);
  }
}

TEST(Ppm, ClampCountAndErrors) {
  TempDir dir("ppm");
  LdrImage img(2, 1, 0.5f);
  img.pixels[0] = 1.5f;
  img.pixels[4] = -0.25f;
  EXPECT_EQ(write_ppm(dir / "c.ppm", img), 2u);
  write_raw(dir / "ascii.ppm", "P3\n1 1\n255\n0 0 0\n");
  EXPECT_THROW(read_ppm(dir / "ascii.ppm"), UnsupportedFormatError);
  write_raw(dir / "deep.ppm", "P6\n1 1\n65535\n" + std::string(6, '\0'));
  EXPECT_THROW(read_ppm(dir / "deep.ppm"), UnsupportedFormatError);
  write_raw(dir / "short.ppm", "P6\n2 2\n255\n" + std::string(5, '\0'));
  EXPECT_THROW(read_ppm(dir / "short.ppm"), TruncatedPayloadError);
  write_raw(dir / "comment.ppm", "P6\n# made by hand\n1 1\n255\n" + std::string("\xff\x00\x80", 3));
  const auto c = read_ppm(dir / "comment.ppm");
  EXPECT_EQ(c.pixels[0], 1.0f);
  EXPECT_EQ(c.pixels[1], 0.0f);
}

TEST(Images, TensorConversionRoundTrip) {
  const auto a = testing::random_image<LdrTag>(5, 4, 1);
  const auto b = testing::random_image<LdrTag>(5, 4, 2);
  const LdrImage* both[] = {&a, &b};
  const auto t = images_to_tensor<float, LdrTag>(both);
  EXPECT_EQ(t.shape(), (Shape{2, 3, 4, 5}));
  EXPECT_EQ(t.at(1, 2, 3, 4), b.at(4, 3, 2));
  EXPECT_EQ(tensor_to_image<LdrTag>(t, 1), b);
  EXPECT_EQ(flip_horizontal(flip_horizontal(a)), a);
  EXPECT_EQ(flip_horizontal(a).at(0, 1, 2), a.at(4, 1, 2));
}

}  // namespace
}  // namespace drht
