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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "tryon/config.hpp"
#include "tryon/crop_augment.hpp"
#include "tryon/data_io.hpp"
#include "tryon/evaluation.hpp"
#include "tryon/fid.hpp"
#include "tryon/toy_data.hpp"
#include "tryon/training.hpp"

namespace tryon {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitContract = 1;
inline constexpr int kExitUsage = 2;

// ---------------------------------------------------------------------------
// RunConfig -> module configs.

inline CropConfig crop_config(const RunConfig& rc) {
  CropConfig c;
  c.scale_lo = rc.get<double>("crop.scale_lo");
  c.scale_hi = rc.get<double>("crop.scale_hi");
  c.ratio_lo = rc.get<double>("crop.ratio_lo");
  c.ratio_hi = rc.get<double>("crop.ratio_hi");
  c.out_h = rc.get<int>("crop.out_h");
  c.out_w = rc.get<int>("crop.out_w");
  c.max_attempts = rc.get<int>("crop.max_attempts");
  c.validate();
  return c;
}

inline AgnosticConfig agnostic_config(const RunConfig& rc) {
  AgnosticConfig a;
  a.dilation_px = rc.get<int>("agnostic.dilation_px");
  a.fill_value = rc.get<float>("agnostic.fill_value");
  if (rc.get<bool>("agnostic.preserve_neck")) a.erase_roles.erase(Role::kNeck);
  return a;
}

inline LoadOptions load_options(const RunConfig& rc) {
  return LoadOptions{rc.get<bool>("data.binarize_mask")};
}

inline NetConfig net_config(const RunConfig& rc) {
  NetConfig n;
  n.base_channels = rc.get<int>("net.base_channels");
  n.tps_rows = rc.get<int>("net.tps_rows");
  n.tps_cols = rc.get<int>("net.tps_cols");
  n.latent_noise = rc.get<bool>("net.latent_noise");
  n.image_h = rc.get<int>("crop.out_h");
  n.image_w = rc.get<int>("crop.out_w");
  return n;
}

inline TrainConfig train_config(const RunConfig& rc, Stage stage) {
  TrainConfig t;
  t.stage = stage;
  t.epochs = rc.get<int>("train.epochs");
  t.max_iters = rc.get<int>("train.max_iters");
  t.batch_size = rc.get<int>("train.batch_size");
  t.max_samples = rc.get<int>("train.max_samples");
  t.lr = rc.get<double>("train.lr");
  t.beta1 = rc.get<double>("train.beta1");
  t.beta2 = rc.get<double>("train.beta2");
  t.ce_weight = rc.get<double>("train.ce_weight");
  t.l1_weight = rc.get<double>("train.l1_weight");
  t.adv_weight = rc.get<double>("train.adv_weight");
  t.bend_weight = rc.get<double>("train.bend_weight");
  t.perceptual_weight = rc.get<double>("train.perceptual_weight");
  t.perceptual_model = rc.get<std::string>("train.perceptual_model");
  t.gan_loss = parse_gan_loss(rc.get<std::string>("train.gan_loss"));
  t.num_workers = rc.get<int>("train.num_workers");
  t.seed = rc.get<std::uint64_t>("train.seed");
  t.crop = crop_config(rc);
  t.per_stage_independent = rc.get<bool>("crop.per_stage_independent");
  t.crop_cloth = rc.get<bool>("crop.crop_cloth");
  t.pose_sigma = rc.get<double>("data.pose_sigma");
  t.agnostic = agnostic_config(rc);
  t.load = load_options(rc);
  t.net = net_config(rc);
  return t;
}

inline InferenceOptions inference_options(const RunConfig& rc) {
  InferenceOptions o;
  o.agnostic = agnostic_config(rc);
  o.load = load_options(rc);
  o.pose_sigma = rc.get<double>("data.pose_sigma");
  o.seed = rc.get<std::uint64_t>("eval.seed");
  return o;
}

// ---------------------------------------------------------------------------

namespace detail {

inline fs::path require_data_root(const RunConfig& rc) {
  const auto root = rc.get<std::string>("data.root");
  if (root.empty()) {
    throw ConfigError(std::string("no data root: pass --data, set data.root, or export ") + kDataRootEnv);
  }
  return root;
}

inline void log_config(const RunConfig& rc, const fs::path& file, std::ostream& err) {
  const std::string text = rc.dump();
  err << "# resolved configuration\n" << text;
  if (!file.empty()) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream(file) << text;
  }
}

// "1.0=dir" or "model@0.7=dir"
inline std::pair<std::string, fs::path> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
    throw CLI::ValidationError("expected KEY=DIR, got '" + s + "'");
  }
  return {s.substr(0, eq), s.substr(eq + 1)};
}

inline double parse_scale(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CLI::ValidationError("bad scale '" + s + "'");
  }
}

}  // namespace detail

// Entry point shared by the binary and the tests. Returns 0 on success, 1 when
// a module rejects its input, 2 on a malformed command line.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Desk-scale virtual try-on with random-resized-crop augmentation"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "sectioned key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a config key (section.key=value), repeatable");
  };

  // prepare
  auto* prepare = app.add_subcommand("prepare", "write the synthetic toy dataset");
  std::string prep_out;
  toy::ToyDatasetSpec spec;
  prepare->add_option("--out", prep_out, "output dataset root")->required();
  prepare->add_option("--train", spec.train_count, "training samples");
  prepare->add_option("--test", spec.test_count, "test samples");
  prepare->add_option("--height", spec.height, "image height");
  prepare->add_option("--width", spec.width, "image width");
  prepare->add_option("--seed", spec.seed, "generator seed");

  // validate-data
  auto* validate = app.add_subcommand("validate-data", "check layout, palette and per-sample consistency");
  std::string data_flag;
  validate->add_option("--data", data_flag, "dataset root");
  add_common(validate);

  // precrop
  auto* precrop = app.add_subcommand("precrop", "crop the test split once at a fixed scale");
  std::string pc_out;
  double pc_scale = 0;
  std::uint64_t pc_seed = 0;
  bool pc_force = false;
  precrop->add_option("--data", data_flag, "source dataset root");
  precrop->add_option("--out", pc_out, "output dataset root")->required();
  precrop->add_option("--scale", pc_scale, "area fraction in (0,1]")->required();
  precrop->add_option("--seed", pc_seed, "window seed")->required();
  precrop->add_flag("--force", pc_force, "allow a non-empty output directory");
  add_common(precrop);

  // train
  auto* train = app.add_subcommand("train", "train one stage in the paired setting");
  std::string stage_flag, train_out;
  train->add_option("--stage", stage_flag, "seg|deform|synth")
      ->required()
      ->check(CLI::IsMember({"seg", "deform", "synth"}));
  train->add_option("--data", data_flag, "dataset root");
  train->add_option("--out", train_out, "checkpoint and metrics directory")->required();
  add_common(train);

  // infer
  auto* infer = app.add_subcommand("infer", "unpaired try-on over a (pre-cropped) test split");
  std::string ckpt_dir, infer_out;
  infer->add_option("--ckpt", ckpt_dir, "directory holding seg.pt, deform.pt, synth.pt")->required();
  infer->add_option("--data", data_flag, "test dataset root");
  infer->add_option("--out", infer_out, "image output directory")->required();
  add_common(infer);

  // fid
  auto* fid = app.add_subcommand("fid", "FID between two image directories");
  std::string fid_real, fid_fake;
  fid->add_option("--real", fid_real, "reference image directory")->required();
  fid->add_option("--fake", fid_fake, "generated image directory")->required();
  add_common(fid);

  // report
  auto* report = app.add_subcommand("report", "FID-vs-scale table and chart for several models");
  std::vector<std::string> real_specs, fake_specs;
  std::string report_out;
  report->add_option("--real", real_specs, "SCALE=DIR reference set, repeatable")->required();
  report->add_option("--fake", fake_specs, "MODEL@SCALE=DIR generated set, repeatable")->required();
  report->add_option("--out", report_out, "report directory")->required();
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    RunConfig rc;
    if (!config_file.empty()) rc.load_file(config_file);
    rc.apply_env();
    for (const auto& kv : overrides) rc.set_assignment(kv);
    if (!data_flag.empty()) rc.set("data.root", data_flag, Provenance::kFlag);

    if (*prepare) {
      toy::write_toy_dataset(prep_out, spec);
      out << "wrote toy dataset (" << spec.train_count << " train, " << spec.test_count
          << " test, " << spec.height << "x" << spec.width << ") to " << prep_out << "\n";
    } else if (*validate) {
      const fs::path root = detail::require_data_root(rc);
      detail::log_config(rc, {}, err);
      const std::size_t n = validate_dataset(root, load_options(rc));
      out << "ok: " << n << " samples validated under " << root.string() << "\n";
    } else if (*precrop) {
      const fs::path root = detail::require_data_root(rc);
      rc.set("crop.scale_lo", std::to_string(pc_scale), Provenance::kFlag);
      rc.set("crop.scale_hi", std::to_string(pc_scale), Provenance::kFlag);
      detail::log_config(rc, {}, err);
      const auto rep = precrop_dataset(root, pc_out, pc_scale, pc_seed, crop_config(rc), pc_force,
                                       load_options(rc));
      double lo = 1, hi = 0;
      for (const auto& e : rep.windows) {
        lo = std::min(lo, e.window.area_fraction());
        hi = std::max(hi, e.window.area_fraction());
      }
      out << "pre-cropped " << rep.windows.size() << " test images at scale " << pc_scale
          << " (area fraction " << lo << ".." << hi << ") into " << pc_out << "\n";
    } else if (*train) {
      const fs::path root = detail::require_data_root(rc);
      const Stage stage = parse_stage(stage_flag);
      const TrainConfig tc = train_config(rc, stage);
      tc.validate();
      detail::log_config(rc, fs::path(train_out) / (stage_name(stage) + "_config.ini"), err);
      torch::set_num_threads(1);
      const auto r = train_stage(tc, root, train_out);
      out << "trained " << stage_name(stage) << " for " << r.log.size() << " iterations; final loss "
          << (r.log.empty() ? 0.0 : r.log.back().total) << "; checkpoint " << r.checkpoint.string()
          << "\n";
    } else if (*infer) {
      const fs::path root = detail::require_data_root(rc);
      InferenceOptions io = inference_options(rc);
      if (rc.entry("crop.out_h").source != Provenance::kDefault ||
          rc.entry("crop.out_w").source != Provenance::kDefault ||
          rc.entry("net.base_channels").source != Provenance::kDefault) {
        NetConfig expected = net_config(rc);
        expected.num_labels =
            SegmentationMap{LabelRaster{}, load_palette(DatasetPaths{root, Split::kTest}.palette())}
                .num_labels();
        io.expected_net = expected;
      }
      detail::log_config(rc, fs::path(infer_out) / "infer_config.ini", err);
      torch::set_num_threads(1);
      const auto r = run_unpaired_inference(ckpt_dir, root, infer_out, io);
      out << "wrote " << r.images.size() << " try-on images and " << r.manifest.string() << "\n";
    } else if (*fid) {
      const auto ex = make_extractor(rc.get<std::string>("eval.extractor"));
      const double d = frechet_distance(fid_stats_for_dir(fid_real, *ex), fid_stats_for_dir(fid_fake, *ex));
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", d);
      out << buf << "\n";
    } else if (*report) {
      std::map<double, fs::path> real;
      std::map<std::pair<std::string, double>, fs::path> fake;
      for (const auto& s : real_specs) {
        const auto [k, dir] = detail::split_assignment(s);
        real[detail::parse_scale(k)] = dir;
      }
      for (const auto& s : fake_specs) {
        const auto [k, dir] = detail::split_assignment(s);
        const auto at = k.find('@');
        if (at == std::string::npos || at == 0) {
          throw CLI::ValidationError("--fake expects MODEL@SCALE=DIR, got '" + s + "'");
        }
        fake[{k.substr(0, at), detail::parse_scale(k.substr(at + 1))}] = dir;
      }
      const auto ex = make_extractor(rc.get<std::string>("eval.extractor"));
      const FidReport rep = build_fid_report(real, fake, *ex);
      const ReportFiles files = write_fid_report(rep, report_out);
      out << report_csv(rep) << "wrote " << files.table.string() << ", " << files.chart_csv.string()
          << ", " << files.chart_png.string() << "\n";
    }
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitContract;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitContract;
  }
  return kExitOk;
}

}  // namespace tryon
