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

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "tryon/crop_augment.hpp"
#include "tryon/data_io.hpp"

namespace tryon::toy {

// Label layout of the synthetic corpus.
enum Label : std::uint8_t {
  kBackground = 0,
  kHair = 1,
  kFace = 2,
  kNeck = 3,
  kUpper = 4,
  kLower = 5,
  kArms = 6,
  kLegs = 7,
  kAgnosticLabel = 8,
};

inline Palette palette() {
  return {{kBackground, Role::kBackground}, {kHair, Role::kHair},
          {kFace, Role::kFace},             {kNeck, Role::kNeck},
          {kUpper, Role::kUpperClothes},    {kLower, Role::kLowerClothes},
          {kArms, Role::kArms},             {kLegs, Role::kLegs},
          {kAgnosticLabel, Role::kAgnostic}};
}

inline std::string make_id(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", n);
  return buf;
}

struct Garment {
  std::array<float, 3> base{};
  std::array<float, 3> stripe{};
  int stripes = 4;
};

inline Garment garment_for(std::uint64_t seed, int cloth_index) {
  CropRng rng(derive_seed(seed, static_cast<std::uint64_t>(cloth_index), 0, 7));
  std::uniform_real_distribution<float> u(0.1f, 0.9f);
  Garment g;
  for (auto& c : g.base) c = u(rng);
  for (int c = 0; c < 3; ++c) g.stripe[c] = 1.0f - g.base[c] * 0.8f;
  g.stripes = std::uniform_int_distribution<int>(2, 6)(rng);
  return g;
}

// Garment colour at garment-local coordinates (u, v) in [0,1]^2.
inline std::array<float, 3> garment_color(const Garment& g, double u, double v) {
  const bool alt = static_cast<int>(std::floor(v * g.stripes)) % 2 == 1;
  std::array<float, 3> c = alt ? g.stripe : g.base;
  const float shade = static_cast<float>(0.85 + 0.15 * u);
  for (auto& x : c) x *= shade;
  return c;
}

struct Body {
  double cx, head_y, head_rx, head_ry, torso_top, torso_bottom, torso_half, arm_width, arm_bottom,
      lower_bottom, leg_bottom;
};

// Sample `person_index` wears garment `cloth_index`; geometry varies with the
// person, appearance with the garment.
inline Sample make_sample(int person_index, int cloth_index, int height, int width,
                          std::uint64_t seed = 0) {
  CropRng rng(derive_seed(seed, static_cast<std::uint64_t>(person_index), 0, 3));
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const double H = height, W = width;
  const double s = 1.0 + 0.08 * jitter(rng);
  Body b{};
  b.cx = W * (0.5 + 0.05 * jitter(rng));
  b.head_y = H * (0.15 + 0.01 * jitter(rng));
  b.head_rx = W * 0.10 * s;
  b.head_ry = H * 0.085 * s;
  b.torso_top = H * (0.29 + 0.015 * jitter(rng));
  b.torso_bottom = H * (0.60 + 0.03 * jitter(rng));
  b.torso_half = W * 0.19 * s;
  b.arm_width = W * 0.08 * s;
  b.arm_bottom = H * (0.56 + 0.02 * jitter(rng));
  b.lower_bottom = H * 0.80;
  b.leg_bottom = H * 0.97;

  const Garment g = garment_for(seed, cloth_index);
  std::uniform_real_distribution<float> bg_dist(0.8f, 0.95f);
  const std::array<float, 3> bg{bg_dist(rng), bg_dist(rng), bg_dist(rng)};
  const std::array<float, 3> skin{0.87f, 0.68f, 0.55f};
  const std::array<float, 3> hair{0.2f, 0.13f, 0.08f};
  const std::array<float, 3> lower{0.15f, 0.18f, 0.35f};

  Sample smp;
  smp.sample_id = make_id(person_index);
  smp.cloth_id = make_id(cloth_index);
  smp.person_image = ImageF(3, height, width);
  smp.parse.labels = LabelRaster(1, height, width, kBackground);
  smp.parse.palette = palette();

  for (int i = 0; i < height; ++i) {
    const double y = i + 0.5;
    for (int j = 0; j < width; ++j) {
      const double x = j + 0.5;
      const double dx = x - b.cx;
      std::uint8_t label = kBackground;
      std::array<float, 3> col = bg;
      const double e = (dx * dx) / (b.head_rx * b.head_rx) +
                       (y - b.head_y) * (y - b.head_y) / (b.head_ry * b.head_ry);
      if (e <= 1.0) {
        label = y < b.head_y - 0.35 * b.head_ry ? kHair : kFace;
      } else if (y >= b.head_y + 0.8 * b.head_ry && y < b.torso_top && std::abs(dx) < 0.05 * W) {
        label = kNeck;
      } else if (y >= b.torso_top && y < b.torso_bottom && std::abs(dx) < b.torso_half) {
        label = kUpper;
        const double u = (dx + b.torso_half) / (2 * b.torso_half);
        const double v = (y - b.torso_top) / (b.torso_bottom - b.torso_top);
        col = garment_color(g, u, v);
      } else if (y >= b.torso_top + 0.02 * H && y < b.arm_bottom &&
                 std::abs(dx) >= b.torso_half && std::abs(dx) < b.torso_half + b.arm_width) {
        label = kArms;
      } else if (y >= b.torso_bottom && y < b.lower_bottom && std::abs(dx) < 0.16 * W * s) {
        label = kLower;
      } else if (y >= b.lower_bottom && y < b.leg_bottom && std::abs(dx) > 0.02 * W &&
                 std::abs(dx) < 0.13 * W * s) {
        label = kLegs;
      }
      if (label == kHair) col = hair;
      if (label == kFace || label == kNeck || label == kArms || label == kLegs) col = skin;
      if (label == kLower) col = lower;
      smp.parse.labels(i, j) = label;
      for (int c = 0; c < 3; ++c) smp.person_image.at(c, i, j) = quantize_unit(col[c]);
    }
  }

  // Flat catalogue photo of the garment on white.
  smp.cloth_image = ImageF(3, height, width, 1.0f);
  smp.cloth_mask = LabelRaster(1, height, width, 0);
  const double gx0 = 0.2 * W, gx1 = 0.8 * W, gy0 = 0.15 * H, gy1 = 0.85 * H;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double x = j + 0.5, y = i + 0.5;
      if (x < gx0 || x >= gx1 || y < gy0 || y >= gy1) continue;
      const auto col = garment_color(g, (x - gx0) / (gx1 - gx0), (y - gy0) / (gy1 - gy0));
      for (int c = 0; c < 3; ++c) smp.cloth_image.at(c, i, j) = quantize_unit(col[c]);
      smp.cloth_mask(i, j) = 1;
    }
  }

  auto kp = [&](double x, double y) { return Keypoint{std::clamp(x, 0.0, W - 1e-3), std::clamp(y, 0.0, H - 1e-3), 1.0}; };
  const double sh = b.torso_half, arm = b.torso_half + 0.5 * b.arm_width;
  auto& p = smp.keypoints.points;
  p[0] = kp(b.cx, b.head_y + 0.1 * b.head_ry);
  p[1] = kp(b.cx, b.torso_top - 0.01 * H);
  p[2] = kp(b.cx - sh, b.torso_top + 0.02 * H);
  p[3] = kp(b.cx - arm, 0.5 * (b.torso_top + b.arm_bottom));
  p[4] = kp(b.cx - arm, b.arm_bottom - 0.01 * H);
  p[5] = kp(b.cx + sh, b.torso_top + 0.02 * H);
  p[6] = kp(b.cx + arm, 0.5 * (b.torso_top + b.arm_bottom));
  p[7] = kp(b.cx + arm, b.arm_bottom - 0.01 * H);
  p[8] = kp(b.cx - 0.08 * W, b.torso_bottom);
  p[9] = kp(b.cx - 0.08 * W, 0.5 * (b.torso_bottom + b.leg_bottom));
  p[10] = kp(b.cx - 0.08 * W, b.leg_bottom - 0.02 * H);
  p[11] = kp(b.cx + 0.08 * W, b.torso_bottom);
  p[12] = kp(b.cx + 0.08 * W, 0.5 * (b.torso_bottom + b.leg_bottom));
  p[13] = kp(b.cx + 0.08 * W, b.leg_bottom - 0.02 * H);
  p[14] = kp(b.cx - 0.35 * b.head_rx, b.head_y - 0.1 * b.head_ry);
  p[15] = kp(b.cx + 0.35 * b.head_rx, b.head_y - 0.1 * b.head_ry);
  p[16] = kp(b.cx - 0.9 * b.head_rx, b.head_y);
  p[17] = kp(b.cx + 0.9 * b.head_rx, b.head_y);
  return smp;
}

struct ToyDatasetSpec {
  int train_count = 16;
  int test_count = 8;
  int height = 64;
  int width = 48;
  std::uint64_t seed = 0;
};

// Writes train (paired) and test (paired + unpaired) splits under root.
inline void write_toy_dataset(const fs::path& root, const ToyDatasetSpec& spec) {
  if (spec.test_count == 1) throw ConfigError("an unpaired test list needs at least 2 samples");
  save_palette(root / "palette.json", palette());
  PairList train{{}, PairMode::kPaired};
  for (int n = 0; n < spec.train_count; ++n) {
    save_sample(root, Split::kTrain, make_sample(n, n, spec.height, spec.width, spec.seed));
    train.entries.emplace_back(make_id(n), make_id(n));
  }
  PairList test_paired{{}, PairMode::kPaired}, test_unpaired{{}, PairMode::kUnpaired};
  const int first = spec.train_count;
  for (int k = 0; k < spec.test_count; ++k) {
    const int n = first + k;
    save_sample(root, Split::kTest, make_sample(n, n, spec.height, spec.width, spec.seed));
    test_paired.entries.emplace_back(make_id(n), make_id(n));
    test_unpaired.entries.emplace_back(make_id(n), make_id(first + (k + 1) % spec.test_count));
  }
  for (auto sub : kModalityDirs) {
    fs::create_directories(root / "train" / sub);
    fs::create_directories(root / "test" / sub);
  }
  write_pairs(DatasetPaths{root, Split::kTrain}.pairs(PairMode::kPaired), train);
  write_pairs(DatasetPaths{root, Split::kTest}.pairs(PairMode::kPaired), test_paired);
  write_pairs(DatasetPaths{root, Split::kTest}.pairs(PairMode::kUnpaired), test_unpaired);
}

}  // namespace tryon::toy
