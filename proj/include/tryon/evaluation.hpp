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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "tryon/agnostic.hpp"
#include "tryon/checkpoint.hpp"
#include "tryon/crop_augment.hpp"
#include "tryon/data_io.hpp"
#include "tryon/fid.hpp"
#include "tryon/pipeline.hpp"
#include "tryon/raster.hpp"

namespace tryon {

namespace fs = std::filesystem;

inline constexpr const char* kInferenceManifest = "inference_manifest.json";

struct InferenceOptions {
  AgnosticConfig agnostic;
  LoadOptions load;
  double pose_sigma = 3.0;
  std::uint64_t seed = 0;                 // only used when the nets draw latent noise
  std::optional<NetConfig> expected_net;  // refuse checkpoints built differently
};

struct InferenceResult {
  std::vector<fs::path> images;
  fs::path manifest;
};

inline std::string output_name(const std::string& person, const std::string& cloth) {
  return person + "_" + cloth + ".png";
}

// Unpaired try-on over the test split of `test_root`. Each person is resized
// (never re-cropped) to the network size, so a pre-cropped set keeps its windows.
inline InferenceResult run_unpaired_inference(const fs::path& ckpt_dir, const fs::path& test_root,
                                              const fs::path& out_dir,
                                              const InferenceOptions& opts = {}) {
  const fs::path seg_ckpt = ckpt_dir / "seg.pt", deform_ckpt = ckpt_dir / "deform.pt",
                 synth_ckpt = ckpt_dir / "synth.pt";
  const NetConfig net = NetConfig::from_json(read_checkpoint_header(seg_ckpt).at("net"));
  if (opts.expected_net && !(*opts.expected_net == net)) {
    throw DependencyError("checkpoint net config " + net.to_json().dump() +
                          " differs from requested " + opts.expected_net->to_json().dump());
  }
  const Palette palette = load_palette(DatasetPaths{test_root, Split::kTest}.palette());
  if (SegmentationMap{LabelRaster{}, palette}.num_labels() != net.num_labels) {
    throw DependencyError("checkpoint expects " + std::to_string(net.num_labels) +
                          " labels, test palette has a different count");
  }
  torch::manual_seed(opts.seed);
  TryonModels models(net);
  load_checkpoint(seg_ckpt, models.seg, "seg", net);
  load_checkpoint(deform_ckpt, models.deform, "deform", net);
  load_checkpoint(synth_ckpt, models.synth, "synth", net);
  models.seg->eval();
  models.deform->eval();
  models.synth->eval();

  const PairList pairs = load_dataset_index(test_root, Split::kTest, PairMode::kUnpaired);
  CropConfig resize;
  resize.out_h = net.image_h;
  resize.out_w = net.image_w;
  fs::create_directories(out_dir);

  InferenceResult res;
  nlohmann::json listed = nlohmann::json::array();
  for (std::size_t n = 0; n < pairs.entries.size(); ++n) {
    const auto& [person, cloth] = pairs.entries[n];
    const Sample s = load_sample(test_root, Split::kTest, person, cloth, opts.load);
    const AgnosticResult agn = build_agnostic(s, opts.agnostic);
    const CropWindow full = CropWindow::full(s.height(), s.width());
    const CroppedBundle b = crop_sample(s, agn, full, resize);
    const Batch batch = collate({b}, net.num_labels, opts.pose_sigma);
    if (net.latent_noise) torch::manual_seed(derive_seed(opts.seed, n));
    const torch::Tensor out = models.infer(batch);
    const fs::path path = out_dir / output_name(person, cloth);
    write_png_rgb(path, from_signed(out[0]));
    res.images.push_back(path);
    listed.push_back({{"person", person}, {"cloth", cloth}, {"image", path.filename().string()}});
  }

  const fs::path crop_manifest = test_root / kPrecropManifest;
  nlohmann::json manifest = {
      {"pairs", listed},
      {"checkpoints",
       {{"seg", file_hash(seg_ckpt)}, {"deform", file_hash(deform_ckpt)}, {"synth", file_hash(synth_ckpt)}}},
      {"crop_manifest", fs::exists(crop_manifest) ? nlohmann::json(file_hash(crop_manifest)) : nlohmann::json()},
      {"net", net.to_json()},
      {"out_h", net.image_h},
      {"out_w", net.image_w}};
  res.manifest = out_dir / kInferenceManifest;
  std::ofstream(res.manifest) << manifest.dump(2) << "\n";
  return res;
}

// ---------------------------------------------------------------------------
// FID-vs-scale report.

struct FidRow {
  std::string model;
  double scale = 1.0;
  double fid = 0.0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
};

struct FidReport {
  std::string extractor_id;
  std::vector<FidRow> rows;  // sorted by (model, scale)
};

inline std::string format_scale(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  return buf;
}

inline FidReport build_fid_report(const std::map<double, fs::path>& real_dirs_by_scale,
                                  const std::map<std::pair<std::string, double>, fs::path>& fake_dirs,
                                  const FeatureExtractor& ex) {
  if (fake_dirs.empty()) throw DataError("no generated image directories given");
  std::map<double, FidStats> real;
  for (const auto& [scale, dir] : real_dirs_by_scale) real.emplace(scale, fid_stats_for_dir(dir, ex));
  FidReport rep;
  rep.extractor_id = ex.id();
  for (const auto& [key, dir] : fake_dirs) {
    const auto it = real.find(key.second);
    if (it == real.end()) {
      throw DataError("no real reference directory for scale " + format_scale(key.second));
    }
    const FidStats fake = fid_stats_for_dir(dir, ex);
    rep.rows.push_back({key.first, key.second, frechet_distance(it->second, fake),
                        static_cast<std::size_t>(it->second.n), static_cast<std::size_t>(fake.n)});
  }
  return rep;  // std::map iteration already yields (model, scale) order
}

inline std::string report_csv(const FidReport& rep) {
  std::string s = "model,scale,fid,n_real,n_fake\n";
  char buf[256];
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%zu,%zu\n", r.model.c_str(),
                  format_scale(r.scale).c_str(), r.fid, r.n_real, r.n_fake);
    s += buf;
  }
  return s;
}

// One column per model, one row per scale (descending, as crops get tighter).
inline std::string chart_csv(const FidReport& rep) {
  std::vector<std::string> models;
  std::vector<double> scales;
  for (const auto& r : rep.rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(scales.begin(), scales.end(), r.scale) == scales.end()) scales.push_back(r.scale);
  }
  std::sort(scales.rbegin(), scales.rend());
  std::string s = "scale";
  for (const auto& m : models) s += "," + m;
  s += "\n";
  char buf[64];
  for (double sc : scales) {
    s += format_scale(sc);
    for (const auto& m : models) {
      s += ",";
      for (const auto& r : rep.rows) {
        if (r.model == m && r.scale == sc) {
          std::snprintf(buf, sizeof buf, "%.6f", r.fid);
          s += buf;
        }
      }
    }
    s += "\n";
  }
  return s;
}

// Grouped bar chart: scales on the x axis, one bar per model.
inline cv::Mat render_chart(const FidReport& rep, int width = 640, int height = 400) {
  std::vector<std::string> models;
  std::vector<double> scales;
  double ymax = 0;
  for (const auto& r : rep.rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(scales.begin(), scales.end(), r.scale) == scales.end()) scales.push_back(r.scale);
    ymax = std::max(ymax, r.fid);
  }
  std::sort(scales.rbegin(), scales.rend());
  if (ymax <= 0) ymax = 1;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const int left = 70, right = 20, top = 40, bottom = 50;
  const int pw = width - left - right, ph = height - top - bottom;
  const cv::Scalar black(0, 0, 0), grey(200, 200, 200);
  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  for (int t = 0; t <= 4; ++t) {
    const int y = top + ph - ph * t / 4;
    cv::line(img, {left, y}, {left + pw, y}, grey, 1);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", ymax * t / 4);
    cv::putText(img, buf, {5, y + 4}, font, 0.4, black, 1, cv::LINE_AA);
  }
  cv::line(img, {left, top}, {left, top + ph}, black, 1);
  cv::line(img, {left, top + ph}, {left + pw, top + ph}, black, 1);
  cv::putText(img, "FID vs crop scale", {left, 25}, font, 0.6, black, 1, cv::LINE_AA);
  static const cv::Scalar palette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}};
  const int groups = static_cast<int>(scales.size());
  const int nm = std::max<int>(1, static_cast<int>(models.size()));
  const int gw = groups ? pw / groups : pw;
  const int bw = std::max(4, (gw - 20) / nm);
  for (int g = 0; g < groups; ++g) {
    const int gx = left + g * gw + 10;
    cv::putText(img, "scale " + format_scale(scales[g]), {gx, top + ph + 20}, font, 0.45, black, 1,
                cv::LINE_AA);
    for (int m = 0; m < static_cast<int>(models.size()); ++m) {
      for (const auto& r : rep.rows) {
        if (r.model != models[m] || r.scale != scales[g]) continue;
        const int h = static_cast<int>(ph * r.fid / ymax);
        cv::rectangle(img, {gx + m * bw, top + ph - h}, {gx + (m + 1) * bw - 2, top + ph},
                      palette[m % 4], cv::FILLED);
      }
    }
  }
  for (int m = 0; m < static_cast<int>(models.size()); ++m) {
    const int x = left + pw - 150, y = top + 15 + 18 * m;
    cv::rectangle(img, {x, y - 10}, {x + 12, y + 2}, palette[m % 4], cv::FILLED);
    cv::putText(img, models[m], {x + 18, y}, font, 0.45, black, 1, cv::LINE_AA);
  }
  return img;
}

struct ReportFiles {
  fs::path table, chart_csv, chart_png;
};

inline ReportFiles write_fid_report(const FidReport& rep, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  ReportFiles f{out_dir / "fid_report.csv", out_dir / "fid_chart.csv", out_dir / "fid_chart.png"};
  std::ofstream(f.table, std::ios::binary) << report_csv(rep);
  std::ofstream(f.chart_csv, std::ios::binary) << chart_csv(rep);
  if (!cv::imwrite(f.chart_png.string(), render_chart(rep))) {
    throw IoError("cannot write image " + f.chart_png.string());
  }
  return f;
}

}  // namespace tryon
