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

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "tryon/agnostic.hpp"
#include "tryon/crop_augment.hpp"
#include "tryon/data_io.hpp"
#include "tryon/errors.hpp"
#include "tryon/networks.hpp"

namespace tryon {

// Network-ready tensors for a group of cropped bundles. Images are in [-1,1].
struct Batch {
  std::vector<std::string> ids;
  std::vector<CropWindow> windows;
  std::vector<std::uint64_t> window_ids;
  torch::Tensor person;          // [B,3,H,W]
  torch::Tensor parse_labels;    // [B,H,W] long
  torch::Tensor parse;           // [B,L,H,W]
  torch::Tensor agnostic_image;  // [B,3,H,W]
  torch::Tensor agnostic_parse;  // [B,L,H,W]
  torch::Tensor pose;            // [B,18,H,W]
  torch::Tensor cloth;           // [B,3,H,W]
  torch::Tensor cloth_mask;      // [B,1,H,W]
  torch::Tensor garment_mask;    // [B,1,H,W], worn garment in the cropped parse
  int garment_label = 0;

  int64_t size() const { return static_cast<int64_t>(ids.size()); }
  double mean_area_fraction() const {
    double s = 0;
    for (const auto& w : windows) s += w.area_fraction();
    return windows.empty() ? 0.0 : s / static_cast<double>(windows.size());
  }
};

// Outside the erased region the agnostic parse must equal the ground-truth
// parse pixel for pixel; a mismatch means the two were cropped differently.
inline void check_window_sync(const CroppedBundle& b) {
  const int agn = b.agnostic_parse.label_for(Role::kAgnostic);
  const auto& gt = b.parse.labels.data();
  const auto& ag = b.agnostic_parse.labels.data();
  if (gt.size() != ag.size()) {
    throw ConsistencyError("sample " + b.sample_id + ": parse and agnostic parse sizes differ");
  }
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (ag[k] != agn && ag[k] != gt[k]) {
      throw ConsistencyError("sample " + b.sample_id + ": agnostic parse not cropped with window " +
                             std::to_string(b.window_id));
    }
  }
}

inline Batch collate(const std::vector<CroppedBundle>& bundles, int num_labels, double pose_sigma) {
  if (bundles.empty()) throw ContractError("empty batch");
  Batch b;
  std::vector<torch::Tensor> person, labels, agn_img, agn_labels, pose, cloth, mask;
  b.garment_label = bundles.front().parse.label_for(Role::kUpperClothes);
  for (const auto& x : bundles) {
    check_window_sync(x);
    b.ids.push_back(x.sample_id);
    b.windows.push_back(x.window);
    b.window_ids.push_back(x.window_id);
    const int h = x.person_image.height(), w = x.person_image.width();
    person.push_back(to_signed(x.person_image));
    labels.push_back(labels_to_tensor(x.parse.labels));
    agn_img.push_back(to_signed(x.agnostic_image));
    agn_labels.push_back(labels_to_tensor(x.agnostic_parse.labels));
    pose.push_back(to_tensor(x.pose_map ? *x.pose_map : render_pose_map(x.keypoints, h, w, pose_sigma)));
    cloth.push_back(to_signed(x.cloth_image));
    mask.push_back(mask_to_tensor(x.cloth_mask));
  }
  b.person = torch::stack(person);
  b.parse_labels = torch::stack(labels);
  b.parse = one_hot_labels(b.parse_labels, num_labels);
  b.agnostic_image = torch::stack(agn_img);
  b.agnostic_parse = one_hot_labels(torch::stack(agn_labels), num_labels);
  b.pose = torch::stack(pose);
  b.cloth = torch::stack(cloth);
  b.cloth_mask = torch::stack(mask);
  b.garment_mask = (b.parse_labels == b.garment_label).to(torch::kFloat).unsqueeze(1);
  return b;
}

// The three generators. Later stages consume the argmax layout of the
// segmentation generator, never the ground truth.
struct TryonModels {
  explicit TryonModels(const NetConfig& net) : net(net), seg(net), deform(net), synth(net) {}

  NetConfig net;
  SegGenerator seg;
  DeformNet deform;
  TryonGenerator synth;

  torch::Tensor seg_logits(const Batch& b) { return seg(b.agnostic_parse, b.pose, b.cloth); }

  torch::Tensor predicted_layout(const Batch& b) {
    torch::NoGradGuard ng;
    return one_hot_labels(seg_logits(b).argmax(1), net.num_labels);
  }

  static torch::Tensor person_repr(const Batch& b, const torch::Tensor& layout) {
    return torch::cat({b.agnostic_image, b.pose, layout}, 1);
  }

  WarpResult warp(const Batch& b, const torch::Tensor& layout) {
    return warp_cloth(b.cloth, b.cloth_mask, deform(b.cloth, b.cloth_mask, person_repr(b, layout)));
  }

  torch::Tensor tryon(const Batch& b, const torch::Tensor& layout, const WarpResult& w) {
    return synth(b.agnostic_image, w.cloth, layout, misalignment_mask(layout, w.mask, b.garment_label));
  }

  // Full unpaired forward pass.
  torch::Tensor infer(const Batch& b) {
    torch::NoGradGuard ng;
    const torch::Tensor layout = predicted_layout(b);
    const WarpResult w = warp(b, layout);
    return tryon(b, layout, w);
  }
};

}  // namespace tryon
