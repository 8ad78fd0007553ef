// Copyright 2026 The tryon Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "crop_oracles.hpp"
#include "test_util.hpp"
#include "tryon/crop_augment.hpp"
#include "tryon/toy_data.hpp"

namespace tryon {
namespace {

using testing::TempDir;

CropConfig make_cfg(double slo, double shi, double rlo, double rhi, int oh = 512, int ow = 384) {
  CropConfig c;
  c.scale_lo = slo;
  c.scale_hi = shi;
  c.ratio_lo = rlo;
  c.ratio_hi = rhi;
  c.out_h = oh;
  c.out_w = ow;
  return c;
}

TEST(SampleCropWindow, FullImageWindow) {
  CropRng rng(1);
  const CropWindow w = sample_crop_window(1024, 768, make_cfg(1, 1, 0.75, 0.75), rng);
  EXPECT_EQ(w, (CropWindow{0, 0, 1024, 768, 1024, 768}));
}

TEST(SampleCropWindow, FixedScaleSeventyPercent) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CropRng rng(seed);
    const CropWindow w = sample_crop_window(1024, 768, make_cfg(0.7, 0.7, 0.75, 0.75), rng);
    EXPECT_TRUE(w.valid());
    EXPECT_GE(w.area_fraction(), 0.695);
    EXPECT_LE(w.area_fraction(), 0.705);
  }
}

TEST(SampleCropWindow, MeanAreaMatchesReferenceSampler) {
  const auto cfg = make_cfg(0.5, 1.0, 3.0 / 4.0, 4.0 / 3.0);
  CropRng rng(2024);
  oracle::ReferenceCropSampler ref(0.5, 1.0, 3.0 / 4.0, 4.0 / 3.0, 99);
  double sum = 0, ref_sum = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    sum += sample_crop_window(1024, 768, cfg, rng).area_fraction();
    ref_sum += ref.draw_area_fraction(1024, 768);
  }
  EXPECT_NEAR(sum / n, ref_sum / n, 0.005);
  // torchvision RandomResizedCrop.get_params, 1e5 draws: 0.6613.
  EXPECT_NEAR(sum / n, 0.6613, 0.005);
}

TEST(SampleCropWindow, FallbackClampsAspect) {
  // Tall source, ratio range excludes the source ratio and every draw fails.
  auto cfg = make_cfg(1, 1, 1.0, 2.0);
  CropRng rng(0);
  const CropDraw d = draw_crop_window(100, 20, cfg, rng);
  EXPECT_TRUE(d.fallback);
  EXPECT_EQ(d.window, (CropWindow{40, 0, 20, 20, 100, 20}));
  cfg = make_cfg(1, 1, 0.25, 0.5);
  const CropDraw wide = draw_crop_window(20, 100, cfg, rng);
  EXPECT_TRUE(wide.fallback);
  EXPECT_EQ(wide.window, (CropWindow{0, 45, 20, 10, 20, 100}));
}

TEST(SampleCropWindow, InvalidConfig) {
  CropRng rng(0);
  EXPECT_THROW(sample_crop_window(10, 10, make_cfg(0.8, 0.5, 1, 1), rng), ConfigError);
  EXPECT_THROW(sample_crop_window(10, 10, make_cfg(0.0, 0.5, 1, 1), rng), ConfigError);
  EXPECT_THROW(sample_crop_window(10, 10, make_cfg(0.5, 1.1, 1, 1), rng), ConfigError);
  EXPECT_THROW(sample_crop_window(10, 10, make_cfg(0.5, 1, 2, 1), rng), ConfigError);
  EXPECT_THROW(sample_crop_window(10, 10, make_cfg(0.5, 1, 1, 1, 0, 4), rng), ConfigError);
}

TEST(SampleCropWindow, EqualSeedsEqualWindows) {
  const auto cfg = make_cfg(0.3, 1.0, 0.5, 2.0);
  CropRng a(derive_seed(7, 3, 1)), b(derive_seed(7, 3, 1)), c(derive_seed(7, 3, 2));
  bool any_diff = false;
  for (int k = 0; k < 100; ++k) {
    const auto wa = sample_crop_window(300, 200, cfg, a);
    EXPECT_EQ(wa, sample_crop_window(300, 200, cfg, b));
    any_diff = any_diff || !(wa == sample_crop_window(300, 200, cfg, c));
  }
  EXPECT_TRUE(any_diff);
}

// Window legality, area and aspect bounds over random sources and configs.
TEST(SampleCropWindowProperties, LegalityAreaAspect) {
  std::mt19937_64 meta(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CropRng rng(5);
  int accepted = 0;
  for (int k = 0; k < 100000; ++k) {
    const int H = 8 + static_cast<int>(meta() % 1017), W = 8 + static_cast<int>(meta() % 1017);
    const double slo = 0.05 + 0.95 * u(meta), shi = slo + (1.0 - slo) * u(meta);
    const double rlo = 0.3 + 1.2 * u(meta), rhi = rlo * (1.0 + 2.0 * u(meta));
    const CropDraw d = draw_crop_window(H, W, make_cfg(slo, shi, rlo, rhi), rng);
    const CropWindow& w = d.window;
    ASSERT_TRUE(w.valid()) << H << "x" << W;
    ASSERT_EQ(w.src_h, H);
    ASSERT_EQ(w.src_w, W);
    if (d.fallback) continue;
    ++accepted;
    const double eps = 1.0 / (w.height - 0.5) + 1.0 / (w.width - 0.5);
    EXPECT_GE(w.area_fraction(), slo * (1 - eps));
    EXPECT_LE(w.area_fraction(), shi * (1 + eps));
    EXPECT_GE((w.width + 0.5) / (w.height - 0.5), rlo);
    EXPECT_LE((w.width - 0.5) / (w.height + 0.5), rhi);
  }
  EXPECT_GT(accepted, 50000);
}

TEST(TransformKeypoints, UnitScaleExamples) {
  const CropWindow win{100, 50, 512, 384, 1024, 768};
  PoseKeypoints k;
  k.points[0] = {50, 100, 0.9};
  k.points[1] = {356, 242, 0.7};
  k.points[2] = {10, 10, 0.8};
  k.points[3] = {400, 400, 0.0};
  const PoseKeypoints t = transform_keypoints(k, win, 512, 384);
  EXPECT_EQ(t.points[0], (Keypoint{0, 0, 0.9}));
  EXPECT_EQ(t.points[1], (Keypoint{306, 142, 0.7}));
  EXPECT_EQ(t.points[2].confidence, 0.0);
  EXPECT_EQ(t.points[3].confidence, 0.0);
}

TEST(TransformKeypoints, ScalesIntoOutput) {
  const CropWindow win{10, 20, 100, 50, 200, 100};
  PoseKeypoints k;
  k.points[5] = {45, 60, 1.0};
  const PoseKeypoints t = transform_keypoints(k, win, 200, 25);
  EXPECT_DOUBLE_EQ(t.points[5].x, 12.5);
  EXPECT_DOUBLE_EQ(t.points[5].y, 100.0);
}

Sample random_sample(int h, int w, std::mt19937& rng) {
  Sample s = toy::make_sample(static_cast<int>(rng() % 100), static_cast<int>(rng() % 100), h, w,
                              rng());
  for (auto& v : s.parse.labels.data()) v = static_cast<std::uint8_t>(rng() % 8);
  return s;
}

TEST(CropSample, FullWindowIsIdentity) {
  std::mt19937 rng(1);
  const Sample s = toy::make_sample(4, 4, 64, 48);
  const auto ag = build_agnostic(s, {.dilation_px = 2});
  const ImageF pose = render_pose_map(s.keypoints, 64, 48, 3.0);
  const auto b = crop_sample(s, ag, CropWindow::full(64, 48), make_cfg(1, 1, 1, 1, 64, 48), pose);
  EXPECT_EQ(b.person_image, s.person_image);
  EXPECT_EQ(b.parse.labels, s.parse.labels);
  EXPECT_EQ(b.agnostic_image, ag.image);
  EXPECT_EQ(b.agnostic_parse.labels, ag.parse.labels);
  EXPECT_EQ(*b.pose_map, pose);
  EXPECT_EQ(b.cloth_image, s.cloth_image);
  EXPECT_EQ(b.cloth_mask, s.cloth_mask);
  EXPECT_EQ(b.keypoints, s.keypoints);
}

TEST(CropSample, TwoToOneWindowPicksOddOffsets) {
  std::mt19937 rng(2);
  const Sample s = random_sample(8, 6, rng);
  const auto ag = build_agnostic(s, {.dilation_px = 0});
  // 8x6 window onto 4x3: output (i, j) <- source (2i + 1, 2j + 1).
  const auto b = crop_sample(s, ag, CropWindow::full(8, 6), make_cfg(1, 1, 1, 1, 4, 3));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(b.parse.labels(i, j), s.parse.labels(2 * i + 1, 2 * j + 1));
  // Offset 6x4 window at (1, 2) onto 3x2.
  const auto c = crop_sample(s, ag, CropWindow{1, 2, 6, 4, 8, 6}, make_cfg(1, 1, 1, 1, 3, 2));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j)
      EXPECT_EQ(c.parse.labels(i, j), s.parse.labels(1 + 2 * i + 1, 2 + 2 * j + 1));
}

// Every output label equals the nearest-neighbour source label under the
// inverse pixel-centre map, for the parse and the agnostic parse alike.
TEST(CropSample, SynchronizedLabelsMatchBruteForce) {
  std::mt19937 rng(3);
  CropRng crop_rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const Sample s = random_sample(8, 6, rng);
    const auto ag = build_agnostic(s, {.dilation_px = static_cast<int>(rng() % 2)});
    const int oh = 1 + static_cast<int>(rng() % 12), ow = 1 + static_cast<int>(rng() % 9);
    const auto cfg = make_cfg(0.1, 1.0, 0.5, 2.0, oh, ow);
    const CropWindow win = sample_crop_window(8, 6, cfg, crop_rng);
    const auto b = crop_sample(s, ag, win, cfg);
    for (int i = 0; i < oh; ++i) {
      const int si = oracle::nearest_index(i, win.top, win.height, oh);
      for (int j = 0; j < ow; ++j) {
        const int sj = oracle::nearest_index(j, win.left, win.width, ow);
        ASSERT_EQ(b.parse.labels(i, j), s.parse.labels(si, sj));
        ASSERT_EQ(b.agnostic_parse.labels(i, j), ag.parse.labels(si, sj));
      }
    }
  }
}

TEST(CropSample, ContinuousRastersMatchScalarBilinear) {
  std::mt19937 rng(8);
  CropRng crop_rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Sample s = random_sample(20, 15, rng);
    Raster<double> ref(3, 20, 15);
    for (std::size_t n = 0; n < ref.data().size(); ++n) ref.data()[n] = s.person_image.data()[n];
    const auto cfg = make_cfg(0.2, 1.0, 0.5, 2.0, 9 + static_cast<int>(rng() % 20), 7 + static_cast<int>(rng() % 20));
    const CropWindow win = sample_crop_window(20, 15, cfg, crop_rng);
    const auto b = crop_sample(s, build_agnostic(s, {.dilation_px = 0}), win, cfg);
    Raster<double> crop(3, win.height, win.width);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < win.height; ++i)
        for (int j = 0; j < win.width; ++j) crop.at(c, i, j) = ref.at(c, win.top + i, win.left + j);
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < cfg.out_h; ++i) {
        for (int j = 0; j < cfg.out_w; ++j) {
          const double y = (i + 0.5) * win.height / cfg.out_h - 0.5;
          const double x = (j + 0.5) * win.width / cfg.out_w - 0.5;
          EXPECT_NEAR(b.person_image.at(c, i, j), oracle::bilinear_at(crop, c, y, x), 1e-5);
        }
      }
    }
  }
}

TEST(CropSample, GarmentResizedNotCropped) {
  const Sample s = toy::make_sample(1, 2, 64, 48);
  const auto ag = build_agnostic(s, {.dilation_px = 1});
  const CropWindow win{10, 5, 30, 20, 64, 48};
  const auto cfg = make_cfg(1, 1, 1, 1, 32, 24);
  const auto b = crop_sample(s, ag, win, cfg);
  EXPECT_EQ(b.cloth_image.height(), 32);
  EXPECT_EQ(b.cloth_image.width(), 24);
  EXPECT_EQ(b.cloth_image, resample_bilinear(s.cloth_image, full_region(64, 48), 32, 24));
  EXPECT_EQ(b.person_image, resample_bilinear(s.person_image, win.region(), 32, 24));
  const auto with_cloth = crop_sample(s, ag, win, cfg, std::nullopt, {.include_cloth = true});
  EXPECT_EQ(with_cloth.cloth_image, resample_bilinear(s.cloth_image, win.region(), 32, 24));
}

TEST(CropSample, WindowMismatchIsGeometryError) {
  const Sample s = toy::make_sample(1, 1, 64, 48);
  const auto ag = build_agnostic(s, {.dilation_px = 1});
  const auto cfg = make_cfg(1, 1, 1, 1, 32, 24);
  EXPECT_THROW(crop_sample(s, ag, CropWindow{0, 0, 32, 24, 32, 24}, cfg), GeometryError);
  EXPECT_THROW(crop_sample(s, ag, CropWindow{40, 0, 30, 24, 64, 48}, cfg), GeometryError);
}

// Rendering the pose after transforming keypoints agrees with cropping the
// pre-rendered map when the Gaussian width is scaled with the window.
TEST(CropSample, KeypointHeatmapConsistency) {
  std::mt19937 rng(12);
  CropRng crop_rng(13);
  const double sigma = 3.0;
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const Sample s = toy::make_sample(trial, trial, 64, 48, rng());
    const ImageF pose = render_pose_map(s.keypoints, 64, 48, sigma);
    const auto ag = build_agnostic(s, {.dilation_px = 1});
    const CropWindow win = sample_crop_window(64, 48, make_cfg(0.3, 1.0, 0.75, 0.75), crop_rng);
    for (double k : {0.5, 1.0, 2.0}) {
      const int oh = static_cast<int>(std::lround(win.height * k));
      const int ow = static_cast<int>(std::lround(win.width * k));
      if (std::abs(oh - win.height * k) > 1e-9 || std::abs(ow - win.width * k) > 1e-9) continue;
      const auto cfg = make_cfg(1, 1, 1, 1, oh, ow);
      const auto b = crop_sample(s, ag, win, cfg, pose);
      const ImageF after = render_pose_map(b.keypoints, oh, ow, sigma * k);
      for (int c = 0; c < kNumKeypoints; ++c) {
        // Points clipped by the window vanish from `after` but not from the
        // cropped map; skip them.
        if (!b.keypoints.points[c].visible()) continue;
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j)
            worst = std::max(worst, double(std::abs(after.at(c, i, j) - b.pose_map->at(c, i, j))));
      }
    }
  }
  EXPECT_LE(worst, 0.06);
}

class PrecropTest : public ::testing::Test {
 protected:
  void SetUp() override {
    toy::write_toy_dataset(dir_ / "data", {.train_count = 0, .test_count = 6, .height = 128, .width = 96});
  }
  TempDir dir_;
};

TEST_F(PrecropTest, FullScaleIsPureResize) {
  auto cfg = make_cfg(1, 1, 0.75, 0.75, 64, 48);
  const auto rep = precrop_dataset(dir_ / "data", dir_ / "out", 1.0, 3, cfg);
  EXPECT_EQ(rep.count, 6u);
  for (const auto& e : rep.windows) {
    EXPECT_EQ(e.window, CropWindow::full(128, 96));
    const ImageF src = read_png_rgb(DatasetPaths{dir_ / "data", Split::kTest}.image(e.id));
    const ImageF out = read_png_rgb(DatasetPaths{dir_ / "out", Split::kTest}.image(e.id));
    ImageF expect = resample_bilinear(src, full_region(128, 96), 64, 48);
    for (auto& v : expect.data()) v = quantize_unit(v);
    EXPECT_EQ(out, expect);
  }
  EXPECT_NO_THROW(validate_dataset(dir_ / "out"));
}

TEST_F(PrecropTest, SameSeedByteIdentical) {
  auto cfg = make_cfg(0.5, 1.0, 3.0 / 4, 4.0 / 3, 64, 48);
  precrop_dataset(dir_ / "data", dir_ / "a", 0.7, 17, cfg);
  precrop_dataset(dir_ / "data", dir_ / "b", 0.7, 17, cfg);
  EXPECT_EQ(testing::read_file(dir_ / "a" / kPrecropManifest),
            testing::read_file(dir_ / "b" / kPrecropManifest));
  for (const auto& id : list_ids(dir_ / "a" / "test" / "image", ".png")) {
    EXPECT_EQ(testing::read_file(dir_ / "a" / "test" / "image" / (id + ".png")),
              testing::read_file(dir_ / "b" / "test" / "image" / (id + ".png")));
  }
}

TEST_F(PrecropTest, RefusesNonEmptyOutputWithoutForce) {
  auto cfg = make_cfg(0.5, 1.0, 3.0 / 4, 4.0 / 3, 64, 48);
  precrop_dataset(dir_ / "data", dir_ / "o", 0.7, 1, cfg);
  EXPECT_THROW(precrop_dataset(dir_ / "data", dir_ / "o", 0.7, 1, cfg), ConfigError);
  EXPECT_NO_THROW(precrop_dataset(dir_ / "data", dir_ / "o", 0.7, 1, cfg, /*force=*/true));
}

TEST_F(PrecropTest, RejectsScaleOutsideUnitInterval) {
  EXPECT_THROW(precrop_dataset(dir_ / "data", dir_ / "o", 0.0, 1, CropConfig{}), ConfigError);
  EXPECT_THROW(precrop_dataset(dir_ / "data", dir_ / "o", 1.5, 1, CropConfig{}), ConfigError);
}

TEST(Precrop, HalfScaleOnFullResolution) {
  TempDir dir;
  toy::write_toy_dataset(dir / "data", {.train_count = 0, .test_count = 4, .height = 1024, .width = 768});
  const auto rep = precrop_dataset(dir / "data", dir / "out", 0.5, 17, CropConfig{});
  ASSERT_EQ(rep.windows.size(), 4u);
  for (const auto& e : rep.windows) {
    EXPECT_GE(e.window.area_fraction(), 0.495);
    EXPECT_LE(e.window.area_fraction(), 0.505);
  }
  const ImageF img = read_png_rgb(DatasetPaths{dir / "out", Split::kTest}.image(rep.windows[0].id));
  EXPECT_EQ(img.height(), 512);
  EXPECT_EQ(img.width(), 384);
}

TEST(MicroScale, Threshold) {
  EXPECT_TRUE(is_micro_scale(0.5));
  EXPECT_TRUE(is_micro_scale(0.3));
  EXPECT_FALSE(is_micro_scale(0.7));
}

}  // namespace
}  // namespace tryon
