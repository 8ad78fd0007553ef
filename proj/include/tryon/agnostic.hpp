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

#include <algorithm>
#include <set>
#include <string>

#include "tryon/data_io.hpp"

namespace tryon {

struct AgnosticConfig {
  std::set<Role> erase_roles{Role::kUpperClothes, Role::kArms, Role::kNeck};
  int dilation_px = 8;
  float fill_value = 0.5f;
};

// Roles that stay untouched even when the dilated erase region covers them.
inline constexpr std::array<Role, 2> kProtectedRoles{Role::kFace, Role::kHair};

struct AgnosticResult {
  ImageF image;
  SegmentationMap parse;
};

// Square-element binary dilation, separable: rows then columns.
inline LabelRaster dilate_square(const LabelRaster& mask, int radius) {
  if (radius <= 0) return mask;
  const int h = mask.height(), w = mask.width();
  LabelRaster tmp(1, h, w, 0), out(1, h, w, 0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!mask(i, j)) continue;
      const int lo = std::max(0, j - radius), hi = std::min(w - 1, j + radius);
      for (int k = lo; k <= hi; ++k) tmp(i, k) = 1;
    }
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!tmp(i, j)) continue;
      const int lo = std::max(0, i - radius), hi = std::min(h - 1, i + radius);
      for (int k = lo; k <= hi; ++k) out(k, j) = 1;
    }
  }
  return out;
}

inline void validate_agnostic_config(const AgnosticConfig& cfg, const SegmentationMap& parse) {
  for (Role r : cfg.erase_roles) {
    if (parse.labels_with_role(r).empty()) {
      throw PaletteError("erase role " + std::string(role_name(r)) + " missing from palette");
    }
  }
  if (cfg.dilation_px < 0 || cfg.dilation_px > std::min(parse.height(), parse.width()) / 4) {
    throw ConfigError("agnostic dilation_px must lie in [0, min(H,W)/4], got " +
                      std::to_string(cfg.dilation_px));
  }
  if (!(cfg.fill_value >= 0.0f && cfg.fill_value <= 1.0f)) {
    throw ConfigError("agnostic fill_value must lie in [0,1]");
  }
}

// Pixels of the erase roles, dilated; protected roles are removed afterwards.
inline LabelRaster erase_region(const SegmentationMap& parse, const AgnosticConfig& cfg) {
  std::array<std::uint8_t, 256> erase{}, protect{};
  for (const auto& [label, role] : parse.palette) {
    erase[label] = cfg.erase_roles.contains(role);
    protect[label] = std::find(kProtectedRoles.begin(), kProtectedRoles.end(), role) !=
                     kProtectedRoles.end();
  }
  LabelRaster seed(1, parse.height(), parse.width(), 0);
  for (std::size_t n = 0; n < seed.data().size(); ++n) {
    seed.data()[n] = erase[parse.labels.data()[n]];
  }
  LabelRaster region = dilate_square(seed, cfg.dilation_px);
  for (std::size_t n = 0; n < region.data().size(); ++n) {
    if (protect[parse.labels.data()[n]]) region.data()[n] = 0;
  }
  return region;
}

inline AgnosticResult build_agnostic(const ImageF& person, const SegmentationMap& parse,
                                     const AgnosticConfig& cfg) {
  if (!person.same_size(parse.labels)) {
    throw ConsistencyError("person image and parse map sizes differ");
  }
  validate_agnostic_config(cfg, parse);
  const int agnostic_label = parse.label_for(Role::kAgnostic);
  const LabelRaster region = erase_region(parse, cfg);

  AgnosticResult out{person, parse};
  const std::size_t plane = region.plane_size();
  for (std::size_t n = 0; n < plane; ++n) {
    if (!region.data()[n]) continue;
    out.parse.labels.data()[n] = static_cast<std::uint8_t>(agnostic_label);
    for (int c = 0; c < person.channels(); ++c) {
      out.image.data()[c * plane + n] = cfg.fill_value;
    }
  }
  return out;
}

inline AgnosticResult build_agnostic(const Sample& sample, const AgnosticConfig& cfg) {
  return build_agnostic(sample.person_image, sample.parse, cfg);
}

}  // namespace tryon
