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

#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "tryon/data_io.hpp"
#include "tryon/errors.hpp"
#include "tryon/tps_warp.hpp"

namespace tryon {

// Size knobs shared by the three generators and the discriminator.
struct NetConfig {
  int base_channels = 16;
  int num_labels = 9;
  int image_h = 512;
  int image_w = 384;
  int tps_rows = 5;
  int tps_cols = 5;
  bool latent_noise = false;

  static constexpr int kDepth = 4;

  void validate() const {
    if (base_channels < 4) throw ConfigError("net.base_channels must be >= 4");
    if (num_labels < 2) throw ConfigError("net.num_labels must be >= 2");
    const int div = 1 << kDepth;
    if (image_h <= 0 || image_w <= 0 || image_h % div || image_w % div) {
      throw ConfigError("image size must be positive and divisible by " + std::to_string(div));
    }
    if (tps_rows < 2 || tps_cols < 2) throw ConfigError("TPS control grid must be at least 2x2");
  }

  int64_t num_control_points() const { return static_cast<int64_t>(tps_rows) * tps_cols; }

  nlohmann::json to_json() const {
    return {{"base_channels", base_channels}, {"num_labels", num_labels},
            {"image_h", image_h},             {"image_w", image_w},
            {"tps_rows", tps_rows},           {"tps_cols", tps_cols},
            {"latent_noise", latent_noise},   {"depth", kDepth}};
  }
  static NetConfig from_json(const nlohmann::json& j) {
    NetConfig c;
    c.base_channels = j.at("base_channels");
    c.num_labels = j.at("num_labels");
    c.image_h = j.at("image_h");
    c.image_w = j.at("image_w");
    c.tps_rows = j.at("tps_rows");
    c.tps_cols = j.at("tps_cols");
    c.latent_noise = j.at("latent_noise");
    return c;
  }
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// ---------------------------------------------------------------------------
// Raster <-> tensor helpers. Network images live in [-1, 1].

inline torch::Tensor to_tensor(const ImageF& img) {
  return torch::from_blob(const_cast<float*>(img.data().data()),
                          {img.channels(), img.height(), img.width()}, torch::kFloat)
      .clone();
}

inline torch::Tensor to_signed(const ImageF& img) { return to_tensor(img) * 2.0 - 1.0; }

inline ImageF from_signed(const torch::Tensor& t) {
  const torch::Tensor c = ((t.detach().to(torch::kFloat).contiguous() + 1.0) * 0.5).clamp(0.0, 1.0);
  ImageF out(static_cast<int>(c.size(0)), static_cast<int>(c.size(1)), static_cast<int>(c.size(2)));
  std::memcpy(out.data().data(), c.data_ptr<float>(), out.data().size() * sizeof(float));
  return out;
}

inline torch::Tensor labels_to_tensor(const LabelRaster& labels) {
  return torch::from_blob(const_cast<std::uint8_t*>(labels.data().data()),
                          {labels.height(), labels.width()}, torch::kUInt8)
      .to(torch::kLong);
}

// [..., H, W] integer labels -> [..., L, H, W] float one-hot.
inline torch::Tensor one_hot_labels(const torch::Tensor& labels, int num_labels) {
  if (labels.max().item<int64_t>() >= num_labels) {
    throw ShapeError("label exceeds num_labels=" + std::to_string(num_labels));
  }
  return torch::one_hot(labels, num_labels).movedim(-1, -3).to(torch::kFloat);
}

inline torch::Tensor mask_to_tensor(const LabelRaster& m) {
  return labels_to_tensor(m).to(torch::kFloat).unsqueeze(0);
}

namespace detail {

inline void expect_shape(const torch::Tensor& t, int64_t channels, const NetConfig& cfg,
                         const char* what) {
  if (t.dim() != 4 || t.size(1) != channels || t.size(2) != cfg.image_h || t.size(3) != cfg.image_w) {
    throw ShapeError(std::string(what) + ": expected [B," + std::to_string(channels) + "," +
                     std::to_string(cfg.image_h) + "," + std::to_string(cfg.image_w) + "], got " +
                     c10::str(t.sizes()));
  }
}

inline torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride = 1, bool bias = false) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(bias));
}

inline torch::Tensor upsample2(const torch::Tensor& x) {
  namespace F = torch::nn::functional;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kNearest));
}

}  // namespace detail

// conv3x3 -> instance norm (affine) -> leaky ReLU.
struct ConvBlockImpl : torch::nn::Module {
  ConvBlockImpl(int64_t in, int64_t out, int64_t stride = 1)
      : conv(register_module("conv", detail::conv3x3(in, out, stride))),
        norm(register_module(
            "norm", torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(out).affine(true)))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    return torch::leaky_relu(norm(conv(x)), 0.2);
  }

  torch::nn::Conv2d conv;
  torch::nn::InstanceNorm2d norm;
};
TORCH_MODULE(ConvBlock);

// ---------------------------------------------------------------------------
// (1) Segmentation generator: U-Net over agnostic parse, pose and garment.

struct SegGeneratorImpl : torch::nn::Module {
  explicit SegGeneratorImpl(const NetConfig& c) : cfg(c) {
    cfg.validate();
    const int64_t in = cfg.num_labels + kNumKeypoints + 3 + (cfg.latent_noise ? 1 : 0);
    std::vector<int64_t> ch;
    for (int d = 0; d <= NetConfig::kDepth; ++d) ch.push_back(int64_t{cfg.base_channels} << d);
    enc = register_module("enc", torch::nn::ModuleList());
    dec = register_module("dec", torch::nn::ModuleList());
    enc->push_back(ConvBlock(in, ch[0], 1));
    for (int d = 1; d <= NetConfig::kDepth; ++d) enc->push_back(ConvBlock(ch[d - 1], ch[d], 2));
    for (int d = NetConfig::kDepth; d >= 1; --d) dec->push_back(ConvBlock(ch[d] + ch[d - 1], ch[d - 1], 1));
    head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch[0], cfg.num_labels, 1)));
  }

  torch::Tensor forward(const torch::Tensor& agnostic_parse, const torch::Tensor& pose,
                        const torch::Tensor& cloth) {
    detail::expect_shape(agnostic_parse, cfg.num_labels, cfg, "seg_generator agnostic_parse");
    detail::expect_shape(pose, kNumKeypoints, cfg, "seg_generator pose");
    detail::expect_shape(cloth, 3, cfg, "seg_generator cloth");
    std::vector<torch::Tensor> inputs{agnostic_parse, pose, cloth};
    if (cfg.latent_noise) {
      inputs.push_back(torch::randn({cloth.size(0), 1, cfg.image_h, cfg.image_w}, cloth.options()));
    }
    torch::Tensor x = torch::cat(inputs, 1);
    std::vector<torch::Tensor> skips;
    for (auto& m : *enc) {
      x = m->as<ConvBlock>()->forward(x);
      skips.push_back(x);
    }
    for (std::size_t k = 0; k < dec->size(); ++k) {
      const torch::Tensor& skip = skips[skips.size() - 2 - k];
      x = dec[k]->as<ConvBlock>()->forward(torch::cat({detail::upsample2(x), skip}, 1));
    }
    return head(x);
  }

  NetConfig cfg;
  torch::nn::ModuleList enc{nullptr}, dec{nullptr};
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(SegGenerator);

// ---------------------------------------------------------------------------
// (2) Clothes deformation: twin encoders, feature correlation, regressor to
// bounded TPS control-point offsets.

struct FeatureTowerImpl : torch::nn::Module {
  FeatureTowerImpl(int64_t in, int64_t base) {
    blocks = register_module("blocks", torch::nn::Sequential());
    int64_t c = in;
    for (int d = 0; d < NetConfig::kDepth; ++d) {
      const int64_t out = base << d;
      blocks->push_back(ConvBlock(c, out, 2));
      c = out;
    }
  }
  torch::Tensor forward(const torch::Tensor& x) {
    const torch::Tensor f = blocks->forward(x);
    return f / (f.pow(2).sum(1, true) + 1e-6).sqrt();
  }
  torch::nn::Sequential blocks{nullptr};
};
TORCH_MODULE(FeatureTower);

// corr[b, (ya * w + xa), yb, xb] = <fa[b, :, ya, xa], fb[b, :, yb, xb]>.
inline torch::Tensor feature_correlation(const torch::Tensor& fa, const torch::Tensor& fb) {
  const int64_t B = fa.size(0), C = fa.size(1), h = fa.size(2), w = fa.size(3);
  const torch::Tensor a = fa.reshape({B, C, h * w}).transpose(1, 2);  // [B, hw, C]
  const torch::Tensor b = fb.reshape({B, C, h * w});                  // [B, C, hw]
  return torch::bmm(a, b).reshape({B, h * w, h, w});
}

struct DeformNetImpl : torch::nn::Module {
  explicit DeformNetImpl(const NetConfig& c, bool zero_init_head = true) : cfg(c) {
    cfg.validate();
    const int64_t b = cfg.base_channels;
    const int64_t person_in = 3 + kNumKeypoints + cfg.num_labels;
    cloth_tower = register_module("cloth_tower", FeatureTower(4, b));
    person_tower = register_module("person_tower", FeatureTower(person_in, b));
    const int64_t h = cfg.image_h >> NetConfig::kDepth, w = cfg.image_w >> NetConfig::kDepth;
    reg1 = register_module("reg1", ConvBlock(h * w, 2 * b, 1));
    reg2 = register_module("reg2", ConvBlock(2 * b, b, 1));
    fc = register_module("fc", torch::nn::Linear(b * h * w, 2 * cfg.num_control_points()));
    if (zero_init_head) {
      torch::NoGradGuard guard;
      fc->weight.zero_();
      fc->bias.zero_();
    }
  }

  // Offsets [B, 2, rows, cols] in (-1, 1); channel 0 is x, channel 1 is y.
  torch::Tensor forward(const torch::Tensor& cloth, const torch::Tensor& cloth_mask,
                        const torch::Tensor& person_repr) {
    detail::expect_shape(cloth, 3, cfg, "deform cloth");
    detail::expect_shape(cloth_mask, 1, cfg, "deform cloth_mask");
    detail::expect_shape(person_repr, 3 + kNumKeypoints + cfg.num_labels, cfg, "deform person_repr");
    const torch::Tensor fc_feat = cloth_tower(torch::cat({cloth, cloth_mask}, 1));
    const torch::Tensor fp_feat = person_tower(person_repr);
    torch::Tensor x = torch::relu(feature_correlation(fc_feat, fp_feat));
    x = reg2(reg1(x));
    x = fc(x.flatten(1));
    return torch::tanh(x).reshape({-1, 2, cfg.tps_rows, cfg.tps_cols});
  }

  NetConfig cfg;
  FeatureTower cloth_tower{nullptr}, person_tower{nullptr};
  ConvBlock reg1{nullptr}, reg2{nullptr};
  torch::nn::Linear fc{nullptr};
};
TORCH_MODULE(DeformNet);

// Canonical grid plus offsets, [B, K, 2] in (x, y).
inline torch::Tensor offsets_to_dst(const torch::Tensor& offsets, const torch::Tensor& canonical) {
  const int64_t B = offsets.size(0);
  const torch::Tensor o = offsets.reshape({B, 2, -1}).transpose(1, 2);
  return canonical.unsqueeze(0).to(o.scalar_type()) + o;
}

struct WarpResult {
  torch::Tensor cloth;   // [B, 3, H, W]
  torch::Tensor mask;    // [B, 1, H, W]
  torch::Tensor bending; // [B]
  TpsParams params;
};

// TPS from canonical control points to canonical + offsets, solved in double
// precision; garment and mask sampled on the resulting grid.
inline WarpResult warp_cloth(const torch::Tensor& cloth, const torch::Tensor& cloth_mask,
                             const torch::Tensor& offsets, double reg = 0.0) {
  const int64_t rows = offsets.size(2), cols = offsets.size(3);
  const torch::Tensor canonical = canonical_control_points(rows, cols);
  WarpResult r;
  r.params = solve_tps(canonical, offsets_to_dst(offsets.to(torch::kDouble), canonical), reg);
  const torch::Tensor grid =
      make_sampling_grid(r.params, cloth.size(2), cloth.size(3)).to(cloth.scalar_type());
  r.cloth = warp_image(cloth, grid);
  r.mask = warp_image(cloth_mask, grid);
  r.bending = bending_energy(r.params).to(cloth.scalar_type());
  return r;
}

// ---------------------------------------------------------------------------
// (3) Try-on synthesis: encoder-decoder whose decoder normalization is
// modulated by the segmentation layout.

// Predicted garment region not covered by the warped garment (mask >= 0.5).
inline torch::Tensor misalignment_mask(const torch::Tensor& seg_onehot,
                                       const torch::Tensor& warped_mask, int64_t garment_label) {
  const torch::Tensor region = seg_onehot.narrow(1, garment_label, 1);
  const torch::Tensor covered = (warped_mask >= 0.5).to(region.scalar_type());
  return region * (1.0 - covered);
}

struct LayoutNormImpl : torch::nn::Module {
  LayoutNormImpl(int64_t channels, int64_t num_labels, int64_t hidden = 32) {
    norm = register_module(
        "norm", torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(channels).affine(false)));
    shared = register_module("shared", detail::conv3x3(num_labels, hidden, 1, true));
    gamma = register_module("gamma", detail::conv3x3(hidden, channels, 1, true));
    beta = register_module("beta", detail::conv3x3(hidden, channels, 1, true));
  }
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& seg) {
    namespace F = torch::nn::functional;
    const torch::Tensor s = F::interpolate(
        seg, F::InterpolateFuncOptions()
                 .size(std::vector<int64_t>{x.size(2), x.size(3)})
                 .mode(torch::kNearest));
    const torch::Tensor a = torch::relu(shared(s));
    return norm(x) * (1 + gamma(a)) + beta(a);
  }
  torch::nn::InstanceNorm2d norm{nullptr};
  torch::nn::Conv2d shared{nullptr}, gamma{nullptr}, beta{nullptr};
};
TORCH_MODULE(LayoutNorm);

struct LayoutBlockImpl : torch::nn::Module {
  LayoutBlockImpl(int64_t in, int64_t out, int64_t num_labels)
      : conv(register_module("conv", detail::conv3x3(in, out))),
        norm(register_module("norm", LayoutNorm(out, num_labels))) {}
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& seg) {
    return torch::leaky_relu(norm(conv(x), seg), 0.2);
  }
  torch::nn::Conv2d conv;
  LayoutNorm norm;
};
TORCH_MODULE(LayoutBlock);

struct TryonGeneratorImpl : torch::nn::Module {
  explicit TryonGeneratorImpl(const NetConfig& c) : cfg(c) {
    cfg.validate();
    const int64_t in = 3 + 3 + 1 + (cfg.latent_noise ? 1 : 0);
    std::vector<int64_t> ch;
    for (int d = 0; d <= NetConfig::kDepth; ++d) ch.push_back(int64_t{cfg.base_channels} << d);
    enc = register_module("enc", torch::nn::ModuleList());
    enc->push_back(ConvBlock(in, ch[0], 1));
    for (int d = 1; d <= NetConfig::kDepth; ++d) enc->push_back(ConvBlock(ch[d - 1], ch[d], 2));
    for (int d = NetConfig::kDepth; d >= 1; --d) {
      dec.push_back(register_module("dec" + std::to_string(d),
                                    LayoutBlock(ch[d] + ch[d - 1], ch[d - 1], cfg.num_labels)));
    }
    head = register_module("head", detail::conv3x3(ch[0], 3, 1, true));
  }

  torch::Tensor forward(const torch::Tensor& agnostic_image, const torch::Tensor& warped_cloth,
                        const torch::Tensor& seg_onehot, const torch::Tensor& misalignment) {
    detail::expect_shape(agnostic_image, 3, cfg, "synthesis agnostic_image");
    detail::expect_shape(warped_cloth, 3, cfg, "synthesis warped_cloth");
    detail::expect_shape(seg_onehot, cfg.num_labels, cfg, "synthesis seg_map");
    detail::expect_shape(misalignment, 1, cfg, "synthesis misalignment");
    std::vector<torch::Tensor> inputs{agnostic_image, warped_cloth, misalignment};
    if (cfg.latent_noise) {
      inputs.push_back(torch::randn({agnostic_image.size(0), 1, cfg.image_h, cfg.image_w},
                                    agnostic_image.options()));
    }
    torch::Tensor x = torch::cat(inputs, 1);
    std::vector<torch::Tensor> skips;
    for (auto& m : *enc) {
      x = m->as<ConvBlock>()->forward(x);
      skips.push_back(x);
    }
    for (std::size_t k = 0; k < dec.size(); ++k) {
      const torch::Tensor& skip = skips[skips.size() - 2 - k];
      x = dec[k]->forward(torch::cat({detail::upsample2(x), skip}, 1), seg_onehot);
    }
    return torch::tanh(head(x));
  }

  NetConfig cfg;
  torch::nn::ModuleList enc{nullptr};
  std::vector<LayoutBlock> dec;
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(TryonGenerator);

// ---------------------------------------------------------------------------
// Conditional two-scale patch discriminator. Scale 0 sees the full image and
// emits H/8 x W/8 logits; scale 1 sees a 2x average-pooled copy, H/16 x W/16.

struct PatchDiscriminatorImpl : torch::nn::Module {
  PatchDiscriminatorImpl(int64_t in, int64_t base) {
    c1 = register_module("c1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, base, 4).stride(2).padding(1)));
    b2 = register_module("b2", ConvBlock(base, base * 2, 2));
    b3 = register_module("b3", ConvBlock(base * 2, base * 4, 2));
    out = register_module("out", detail::conv3x3(base * 4, 1, 1, true));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    return out(b3(b2(torch::leaky_relu(c1(x), 0.2))));
  }
  torch::nn::Conv2d c1{nullptr}, out{nullptr};
  ConvBlock b2{nullptr}, b3{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

struct DiscriminatorImpl : torch::nn::Module {
  DiscriminatorImpl(const NetConfig& c, int64_t image_channels, int64_t cond_channels)
      : cfg(c), image_channels(image_channels), cond_channels(cond_channels) {
    cfg.validate();
    d0 = register_module("d0", PatchDiscriminator(image_channels + cond_channels, cfg.base_channels));
    d1 = register_module("d1", PatchDiscriminator(image_channels + cond_channels, cfg.base_channels));
  }

  std::vector<torch::Tensor> forward(const torch::Tensor& image, const torch::Tensor& condition) {
    namespace F = torch::nn::functional;
    detail::expect_shape(image, image_channels, cfg, "discriminator image");
    detail::expect_shape(condition, cond_channels, cfg, "discriminator condition");
    const torch::Tensor x = torch::cat({image, condition}, 1);
    const torch::Tensor half = F::avg_pool2d(
        x, F::AvgPool2dFuncOptions(3).stride(2).padding(1).count_include_pad(false));
    return {d0(x), d1(half)};
  }

  NetConfig cfg;
  int64_t image_channels, cond_channels;
  PatchDiscriminator d0{nullptr}, d1{nullptr};
};
TORCH_MODULE(Discriminator);

template <typename M>
int64_t parameter_count(const M& module) {
  int64_t n = 0;
  for (const auto& p : module->parameters()) n += p.numel();
  return n;
}

}  // namespace tryon
