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
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/script.h>
#include <torch/torch.h>

#include "tryon/agnostic.hpp"
#include "tryon/checkpoint.hpp"
#include "tryon/crop_augment.hpp"
#include "tryon/data_io.hpp"
#include "tryon/errors.hpp"
#include "tryon/networks.hpp"
#include "tryon/pipeline.hpp"

namespace tryon {

namespace fs = std::filesystem;

enum class Stage { kSeg, kDeform, kSynth };
enum class GanLoss { kHinge, kBce };

inline std::string stage_name(Stage s) {
  switch (s) {
    case Stage::kSeg: return "seg";
    case Stage::kDeform: return "deform";
    case Stage::kSynth: return "synth";
  }
  return "?";
}
inline Stage parse_stage(std::string_view s) {
  if (s == "seg") return Stage::kSeg;
  if (s == "deform") return Stage::kDeform;
  if (s == "synth") return Stage::kSynth;
  throw ConfigError("unknown stage '" + std::string(s) + "' (seg|deform|synth)");
}
inline GanLoss parse_gan_loss(std::string_view s) {
  if (s == "hinge") return GanLoss::kHinge;
  if (s == "bce") return GanLoss::kBce;
  throw ConfigError("unknown gan loss '" + std::string(s) + "' (hinge|bce)");
}
inline std::string gan_loss_name(GanLoss g) { return g == GanLoss::kHinge ? "hinge" : "bce"; }

inline std::vector<Stage> stage_prerequisites(Stage s) {
  switch (s) {
    case Stage::kSeg: return {};
    case Stage::kDeform: return {Stage::kSeg};
    case Stage::kSynth: return {Stage::kSeg, Stage::kDeform};
  }
  return {};
}

inline fs::path checkpoint_path(const fs::path& dir, Stage s) { return dir / (stage_name(s) + ".pt"); }
inline fs::path metrics_path(const fs::path& dir, Stage s) {
  return dir / (stage_name(s) + "_metrics.csv");
}

struct TrainConfig {
  Stage stage = Stage::kSeg;
  int epochs = 1;
  int max_iters = 0;  // > 0 overrides epochs
  int batch_size = 4;
  int max_samples = 0;  // > 0 keeps only the first N training pairs
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adv_weight = 0.1;
  double l1_weight = 1.0;
  double ce_weight = 1.0;
  double bend_weight = 0.01;
  double perceptual_weight = 0.0;
  std::string perceptual_model;  // TorchScript module mapping [B,3,H,W] to features
  GanLoss gan_loss = GanLoss::kHinge;
  CropConfig crop;
  bool per_stage_independent = false;  // draw a separate window per stage
  bool crop_cloth = false;
  double pose_sigma = 3.0;
  AgnosticConfig agnostic;
  LoadOptions load;
  NetConfig net;  // num_labels and image size are filled from the data and crop config
  int num_workers = 1;
  std::uint64_t seed = 0;

  void validate() const {
    crop.validate();
    if (epochs < 1 && max_iters < 1) throw ConfigError("need epochs >= 1 or max_iters >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(lr > 0)) throw ConfigError("train.lr must be positive");
    if (num_workers < 1) throw ConfigError("train.num_workers must be >= 1");
    if (!(pose_sigma > 0)) throw ConfigError("data.pose_sigma must be positive");
    for (double w : {adv_weight, l1_weight, ce_weight, bend_weight, perceptual_weight}) {
      if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
    }
    switch (stage) {
      case Stage::kSeg:
        if (ce_weight == 0) throw ConfigError("seg stage needs ce_weight > 0");
        break;
      case Stage::kDeform:
        if (l1_weight == 0 || bend_weight == 0) {
          throw ConfigError("deform stage needs l1_weight > 0 and bend_weight > 0");
        }
        break;
      case Stage::kSynth:
        if (l1_weight == 0 || adv_weight == 0) {
          throw ConfigError("synth stage needs l1_weight > 0 and adv_weight > 0");
        }
        break;
    }
    if (perceptual_weight > 0 && perceptual_model.empty()) {
      throw ConfigError("train.perceptual_weight > 0 requires train.perceptual_model");
    }
  }
};

// ---------------------------------------------------------------------------
// Losses.

struct GanLosses {
  torch::Tensor d_loss;
  torch::Tensor g_loss;
};

inline void check_logits(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake) {
  if (real.size() != fake.size() || fake.empty()) {
    throw ContractError("real/fake logits must cover the same non-empty set of scales");
  }
}

// Averaged over discriminator scales.
inline GanLosses hinge_gan_losses(const std::vector<torch::Tensor>& real,
                                  const std::vector<torch::Tensor>& fake) {
  check_logits(real, fake);
  torch::Tensor d = torch::zeros({}), g = torch::zeros({});
  for (std::size_t s = 0; s < real.size(); ++s) {
    d = d + torch::relu(1 - real[s]).mean() + torch::relu(1 + fake[s]).mean();
    g = g - fake[s].mean();
  }
  const double n = static_cast<double>(real.size());
  return {d / n, g / n};
}

inline GanLosses bce_gan_losses(const std::vector<torch::Tensor>& real,
                                const std::vector<torch::Tensor>& fake) {
  check_logits(real, fake);
  torch::Tensor d = torch::zeros({}), g = torch::zeros({});
  for (std::size_t s = 0; s < real.size(); ++s) {
    d = d + torch::softplus(-real[s]).mean() + torch::softplus(fake[s]).mean();
    g = g + torch::softplus(-fake[s]).mean();
  }
  const double n = static_cast<double>(real.size());
  return {d / n, g / n};
}

inline torch::Tensor generator_adv_loss(const std::vector<torch::Tensor>& fake, GanLoss kind) {
  if (fake.empty()) throw ContractError("adversarial term needs discriminator logits");
  torch::Tensor g = torch::zeros({});
  for (const auto& f : fake) g = g + (kind == GanLoss::kHinge ? -f.mean() : torch::softplus(-f).mean());
  return g / static_cast<double>(fake.size());
}

inline GanLosses discriminator_losses(const std::vector<torch::Tensor>& real,
                                      const std::vector<torch::Tensor>& fake, GanLoss kind) {
  return kind == GanLoss::kHinge ? hinge_gan_losses(real, fake) : bce_gan_losses(real, fake);
}

// Feature-space L1 through an external TorchScript network.
class PerceptualLoss {
 public:
  explicit PerceptualLoss(const std::string& path) {
    try {
      module_ = torch::jit::load(path);
    } catch (const c10::Error& e) {
      throw DependencyError("cannot load perceptual model " + path);
    }
    module_.eval();
    for (auto p : module_.parameters()) p.set_requires_grad(false);
  }
  torch::Tensor operator()(const torch::Tensor& x, const torch::Tensor& y) {
    const auto fx = module_.forward({x}).toTensor();
    const auto fy = module_.forward({y.detach()}).toTensor();
    return (fx - fy).abs().mean();
  }

 private:
  torch::jit::Module module_;
};

struct StageOutputs {
  Stage stage = Stage::kSeg;
  torch::Tensor seg_logits;               // seg
  torch::Tensor warped_cloth;             // deform
  torch::Tensor bending;                  // deform, [B]
  torch::Tensor tryon;                    // synth
  std::vector<torch::Tensor> fake_logits; // seg/synth, discriminator on the prediction
  torch::Tensor perceptual;               // synth, optional unweighted term
};

// Weighted components; total is their sum. The l1 column carries the
// perceptual term too when that is enabled.
struct LossBreakdown {
  torch::Tensor total;
  double ce = 0, l1 = 0, adv = 0, bend = 0;
};

// Person pixels inside the worn-garment region, white elsewhere.
inline torch::Tensor garment_target(const Batch& b) {
  return b.person * b.garment_mask + (1 - b.garment_mask);
}

inline LossBreakdown stage_loss(Stage stage, const Batch& batch, const StageOutputs& out,
                                const TrainConfig& cfg) {
  if (out.stage != stage) {
    throw ContractError("outputs from stage " + stage_name(out.stage) + " given to " +
                        stage_name(stage) + " loss");
  }
  auto need = [&](const torch::Tensor& t, const char* what) {
    if (!t.defined()) throw ContractError(stage_name(stage) + " loss needs " + what);
  };
  LossBreakdown r;
  std::vector<torch::Tensor> terms;
  auto add = [&](torch::Tensor t, double& slot) {
    slot += t.item<double>();
    terms.push_back(std::move(t));
  };
  switch (stage) {
    case Stage::kSeg:
      need(out.seg_logits, "seg_logits");
      add(cfg.ce_weight * torch::nn::functional::cross_entropy(out.seg_logits, batch.parse_labels), r.ce);
      if (cfg.adv_weight > 0) add(cfg.adv_weight * generator_adv_loss(out.fake_logits, cfg.gan_loss), r.adv);
      break;
    case Stage::kDeform:
      need(out.warped_cloth, "warped_cloth");
      need(out.bending, "bending");
      add(cfg.l1_weight * (out.warped_cloth - garment_target(batch)).abs().mean(), r.l1);
      add(cfg.bend_weight * out.bending.mean(), r.bend);
      break;
    case Stage::kSynth:
      need(out.tryon, "tryon");
      add(cfg.l1_weight * (out.tryon - batch.person).abs().mean(), r.l1);
      if (cfg.perceptual_weight > 0) {
        need(out.perceptual, "perceptual");
        add(cfg.perceptual_weight * out.perceptual, r.l1);
      }
      if (cfg.adv_weight > 0) add(cfg.adv_weight * generator_adv_loss(out.fake_logits, cfg.gan_loss), r.adv);
      break;
  }
  r.total = terms.front();
  for (std::size_t k = 1; k < terms.size(); ++k) r.total = r.total + terms[k];
  return r;
}

// ---------------------------------------------------------------------------
// Data path.

struct PreparedSample {
  Sample sample;
  AgnosticResult agnostic;
};

inline std::uint64_t window_stream(const TrainConfig& cfg) {
  return cfg.per_stage_independent ? static_cast<std::uint64_t>(cfg.stage) + 1 : 0;
}

// One window per (seed, sample index, epoch); the whole bundle is cropped with it.
inline CroppedBundle make_training_bundle(const PreparedSample& p, std::size_t index, int epoch,
                                          const TrainConfig& cfg) {
  const std::uint64_t wid = derive_seed(cfg.seed, index, static_cast<std::uint64_t>(epoch), window_stream(cfg));
  CropRng rng(wid);
  const CropWindow win = sample_crop_window(p.sample.height(), p.sample.width(), cfg.crop, rng);
  CropSampleOptions opts;
  opts.include_cloth = cfg.crop_cloth;
  opts.window_id = wid;
  return crop_sample(p.sample, p.agnostic, win, cfg.crop, std::nullopt, opts);
}

inline std::vector<PreparedSample> load_training_set(const fs::path& root, const TrainConfig& cfg) {
  PairList pairs = load_dataset_index(root, Split::kTrain, PairMode::kPaired);
  if (cfg.max_samples > 0 && pairs.entries.size() > static_cast<std::size_t>(cfg.max_samples)) {
    pairs.entries.resize(static_cast<std::size_t>(cfg.max_samples));
  }
  if (pairs.entries.empty()) throw DataError("no training pairs under " + root.string());
  std::vector<PreparedSample> out;
  for (const auto& [person, cloth] : pairs.entries) {
    Sample s = load_sample(root, Split::kTrain, person, cloth, cfg.load);
    AgnosticResult a = build_agnostic(s, cfg.agnostic);
    out.push_back({std::move(s), std::move(a)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loop.

struct IterLog {
  int iter = 0;
  double total = 0, ce = 0, l1 = 0, adv = 0, bend = 0, window_area_frac = 0;
};

struct TrainResult {
  fs::path checkpoint;
  fs::path metrics;
  std::vector<IterLog> log;
};

inline void write_metrics_header(std::ofstream& os) {
  os << "iter,total,ce,l1,adv,bend,window_area_frac\n";
}

inline void write_metrics_row(std::ofstream& os, const IterLog& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iter, r.total, r.ce, r.l1,
                r.adv, r.bend, r.window_area_frac);
  os << buf;
}

inline std::vector<IterLog> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<IterLog> out;
  while (std::getline(in, line)) {
    IterLog r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf", &r.iter, &r.total, &r.ce, &r.l1,
                    &r.adv, &r.bend, &r.window_area_frac) != 7) {
      throw DataError("malformed metrics row in " + path.string() + ": " + line);
    }
    out.push_back(r);
  }
  return out;
}

[[noreturn]] inline void abort_non_finite(const fs::path& out_dir, Stage stage, int iter,
                                          const Batch& b) {
  nlohmann::json dump = {{"stage", stage_name(stage)}, {"iter", iter}};
  nlohmann::json items = nlohmann::json::array();
  std::string ids;
  for (int64_t k = 0; k < b.size(); ++k) {
    auto j = window_to_json(b.windows[k]);
    j["id"] = b.ids[k];
    j["window_id"] = b.window_ids[k];
    items.push_back(j);
    ids += (k ? "," : "") + b.ids[k];
  }
  dump["batch"] = items;
  const fs::path path = out_dir / (stage_name(stage) + "_nonfinite.json");
  std::ofstream(path) << dump.dump(2) << "\n";
  throw NumericError("non-finite loss at " + stage_name(stage) + " iteration " +
                     std::to_string(iter) + ", batch [" + ids + "]; windows dumped to " +
                     path.string());
}

inline TrainResult train_stage(TrainConfig cfg, const fs::path& data_root, const fs::path& out_dir) {
  cfg.validate();
  const Palette palette = load_palette(DatasetPaths{data_root, Split::kTrain}.palette());
  cfg.net.num_labels = SegmentationMap{LabelRaster{}, palette}.num_labels();
  cfg.net.image_h = cfg.crop.out_h;
  cfg.net.image_w = cfg.crop.out_w;
  cfg.net.validate();
  for (Stage pre : stage_prerequisites(cfg.stage)) {
    if (!fs::exists(checkpoint_path(out_dir, pre))) {
      throw DependencyError(stage_name(cfg.stage) + " stage needs " +
                            checkpoint_path(out_dir, pre).string() + "; train " + stage_name(pre) +
                            " first");
    }
  }
  fs::create_directories(out_dir);

  torch::manual_seed(cfg.seed);
  TryonModels models(cfg.net);
  for (Stage pre : stage_prerequisites(cfg.stage)) {
    if (pre == Stage::kSeg) load_checkpoint(checkpoint_path(out_dir, pre), models.seg, "seg", cfg.net);
    if (pre == Stage::kDeform) load_checkpoint(checkpoint_path(out_dir, pre), models.deform, "deform", cfg.net);
  }
  models.seg->train(cfg.stage == Stage::kSeg);
  models.deform->train(cfg.stage == Stage::kDeform);
  models.synth->train(cfg.stage == Stage::kSynth);

  torch::nn::Module* generator = nullptr;
  switch (cfg.stage) {
    case Stage::kSeg: generator = models.seg.ptr().get(); break;
    case Stage::kDeform: generator = models.deform.ptr().get(); break;
    case Stage::kSynth: generator = models.synth.ptr().get(); break;
  }
  const int64_t L = cfg.net.num_labels;
  std::optional<Discriminator> disc;
  if (cfg.stage != Stage::kDeform && cfg.adv_weight > 0) {
    disc = cfg.stage == Stage::kSeg ? Discriminator(cfg.net, L, L + 3) : Discriminator(cfg.net, 3, L + 3);
  }
  std::optional<PerceptualLoss> perceptual;
  if (cfg.stage == Stage::kSynth && cfg.perceptual_weight > 0) perceptual.emplace(cfg.perceptual_model);

  const auto adam = torch::optim::AdamOptions(cfg.lr).betas({cfg.beta1, cfg.beta2});
  torch::optim::Adam g_opt(generator->parameters(), adam);
  std::optional<torch::optim::Adam> d_opt;
  if (disc) d_opt.emplace((*disc)->parameters(), adam);

  const std::vector<PreparedSample> data = load_training_set(data_root, cfg);
  const std::size_t n = data.size();
  const int per_epoch = static_cast<int>((n + cfg.batch_size - 1) / cfg.batch_size);
  const int total_iters = cfg.max_iters > 0 ? cfg.max_iters : cfg.epochs * per_epoch;

  TrainResult result;
  result.checkpoint = checkpoint_path(out_dir, cfg.stage);
  result.metrics = metrics_path(out_dir, cfg.stage);
  std::ofstream metrics(result.metrics);
  write_metrics_header(metrics);

  std::vector<std::size_t> order(n);
  int iter = 0;
  for (int epoch = 0; iter < total_iters; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CropRng shuffle_rng(derive_seed(cfg.seed, 0, static_cast<std::uint64_t>(epoch), 0x5eed));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n && iter < total_iters; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<CroppedBundle> bundles(end - start);
      if (cfg.num_workers > 1) {
        std::vector<std::future<CroppedBundle>> jobs;
        for (std::size_t k = start; k < end; ++k) {
          jobs.push_back(std::async(std::launch::async, [&, k] {
            return make_training_bundle(data[order[k]], order[k], epoch, cfg);
          }));
        }
        for (std::size_t k = 0; k < jobs.size(); ++k) bundles[k] = jobs[k].get();
      } else {
        for (std::size_t k = start; k < end; ++k) {
          bundles[k - start] = make_training_bundle(data[order[k]], order[k], epoch, cfg);
        }
      }
      const Batch batch = collate(bundles, static_cast<int>(L), cfg.pose_sigma);
      ++iter;

      StageOutputs out;
      out.stage = cfg.stage;
      torch::Tensor d_image, d_real, d_cond;
      switch (cfg.stage) {
        case Stage::kSeg:
          out.seg_logits = models.seg_logits(batch);
          d_image = torch::softmax(out.seg_logits, 1);
          d_real = batch.parse;
          d_cond = torch::cat({batch.agnostic_parse, batch.cloth}, 1);
          break;
        case Stage::kDeform: {
          const WarpResult w = models.warp(batch, models.predicted_layout(batch));
          out.warped_cloth = w.cloth;
          out.bending = w.bending;
          break;
        }
        case Stage::kSynth: {
          const torch::Tensor layout = models.predicted_layout(batch);
          WarpResult w;
          {
            torch::NoGradGuard ng;
            w = models.warp(batch, layout);
          }
          out.tryon = models.tryon(batch, layout, w);
          if (perceptual) out.perceptual = (*perceptual)(out.tryon, batch.person);
          d_image = out.tryon;
          d_real = batch.person;
          d_cond = torch::cat({layout, w.cloth}, 1);
          break;
        }
      }

      if (disc) {
        const auto real = (*disc)(d_real, d_cond);
        const auto fake = (*disc)(d_image.detach(), d_cond);
        const torch::Tensor d_loss = discriminator_losses(real, fake, cfg.gan_loss).d_loss;
        if (!std::isfinite(d_loss.item<double>())) abort_non_finite(out_dir, cfg.stage, iter, batch);
        d_opt->zero_grad();
        d_loss.backward();
        d_opt->step();
        out.fake_logits = (*disc)(d_image, d_cond);
      }

      const LossBreakdown loss = stage_loss(cfg.stage, batch, out, cfg);
      const double total = loss.total.item<double>();
      if (!std::isfinite(total)) abort_non_finite(out_dir, cfg.stage, iter, batch);
      g_opt.zero_grad();
      loss.total.backward();
      g_opt.step();

      const IterLog row{iter, total, loss.ce, loss.l1, loss.adv, loss.bend, batch.mean_area_fraction()};
      write_metrics_row(metrics, row);
      result.log.push_back(row);
    }
  }
  metrics.close();

  switch (cfg.stage) {
    case Stage::kSeg: save_checkpoint(result.checkpoint, models.seg, "seg", cfg.net); break;
    case Stage::kDeform: save_checkpoint(result.checkpoint, models.deform, "deform", cfg.net); break;
    case Stage::kSynth: save_checkpoint(result.checkpoint, models.synth, "synth", cfg.net); break;
  }
  return result;
}

}  // namespace tryon
