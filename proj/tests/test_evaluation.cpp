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

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "toy_fixture.hpp"
#include "tryon/evaluation.hpp"

namespace tryon {
namespace {

using testing::read_file;
using testing::TempDir;

class TrainedToy : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("tryon_eval");
    toy::ToyDatasetSpec spec;
    spec.train_count = 8;
    spec.test_count = 6;
    toy::write_toy_dataset(data(), spec);
    for (Stage s : {Stage::kSeg, Stage::kDeform, Stage::kSynth}) {
      auto cfg = testing::toy_train_config(s);
      cfg.max_iters = 3;
      train_stage(cfg, data(), ckpt());
    }
  }
  static void TearDownTestSuite() { delete dir_; }
  static fs::path data() { return dir_->path() / "data"; }
  static fs::path ckpt() { return dir_->path() / "ckpt"; }
  static InferenceOptions opts() {
    InferenceOptions o;
    o.agnostic.dilation_px = 2;
    o.pose_sigma = 1.5;
    return o;
  }

  static TempDir* dir_;
};
TempDir* TrainedToy::dir_ = nullptr;

TEST_F(TrainedToy, WritesOneImagePerUnpairedPair) {
  TempDir out("tryon_inf");
  const auto r = run_unpaired_inference(ckpt(), data(), out.path(), opts());
  ASSERT_EQ(r.images.size(), 6u);
  for (const auto& p : r.images) {
    const ImageF img = read_png_rgb(p);
    EXPECT_EQ(img.height(), 64);
    EXPECT_EQ(img.width(), 48);
  }
  const auto m = nlohmann::json::parse(read_file(r.manifest));
  EXPECT_EQ(m.at("pairs").size(), 6u);
  EXPECT_EQ(m.at("pairs")[0].at("cloth"), toy::make_id(9));
  EXPECT_EQ(m.at("checkpoints").at("seg"), file_hash(ckpt() / "seg.pt"));
  EXPECT_TRUE(m.at("crop_manifest").is_null());
}

TEST_F(TrainedToy, RerunIsByteIdentical) {
  TempDir a("tryon_inf"), b("tryon_inf");
  const auto ra = run_unpaired_inference(ckpt(), data(), a.path(), opts());
  const auto rb = run_unpaired_inference(ckpt(), data(), b.path(), opts());
  for (std::size_t k = 0; k < ra.images.size(); ++k) {
    EXPECT_EQ(read_file(ra.images[k]), read_file(rb.images[k]));
  }
  EXPECT_EQ(read_file(ra.manifest), read_file(rb.manifest));
}

TEST_F(TrainedToy, PrecroppedInputKeepsOutputSize) {
  TempDir work("tryon_pc");
  CropConfig cc;
  cc.out_h = 64;
  cc.out_w = 48;
  precrop_dataset(data(), work / "pc", 0.5, 17, cc);
  const auto r = run_unpaired_inference(ckpt(), work / "pc", work / "out", opts());
  ASSERT_EQ(r.images.size(), 6u);
  for (const auto& p : r.images) {
    const ImageF img = read_png_rgb(p);
    EXPECT_EQ(img.height(), 64);
    EXPECT_EQ(img.width(), 48);
  }
  const auto m = nlohmann::json::parse(read_file(r.manifest));
  EXPECT_EQ(m.at("crop_manifest"), file_hash(work / "pc" / kPrecropManifest));
}

TEST_F(TrainedToy, ConfigMismatchIsDependencyError) {
  TempDir out("tryon_inf");
  InferenceOptions o = opts();
  NetConfig other = NetConfig::from_json(read_checkpoint_header(ckpt() / "seg.pt").at("net"));
  other.base_channels += 4;
  o.expected_net = other;
  EXPECT_THROW(run_unpaired_inference(ckpt(), data(), out.path(), o), DependencyError);
  EXPECT_THROW(run_unpaired_inference(out.path(), data(), out / "x", opts()), DependencyError);
}

TEST_F(TrainedToy, MismatchedStageCheckpointRefused) {
  TempDir bad("tryon_ck");
  for (const char* f : {"seg.pt", "deform.pt"}) fs::copy_file(ckpt() / f, bad / f);
  NetConfig net = NetConfig::from_json(read_checkpoint_header(ckpt() / "seg.pt").at("net"));
  net.tps_rows = 3;
  torch::manual_seed(0);
  save_checkpoint(bad / "synth.pt", TryonGenerator(net), "synth", net);
  EXPECT_THROW(run_unpaired_inference(bad.path(), data(), bad / "out", opts()), DependencyError);
}

// ---------------------------------------------------------------------------

void write_noise_images(const fs::path& dir, int count, uint64_t seed, float bias) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (int k = 0; k < count; ++k) {
    ImageF img(3, 16, 12);
    for (auto& v : img.data()) v = std::clamp(u(rng) * 0.6f + bias, 0.f, 1.f);
    write_png_rgb(dir / (toy::make_id(k) + ".png"), img);
  }
}

TEST(FidReport, FakeEqualsRealGivesZero) {
  TempDir d("tryon_fid");
  write_noise_images(d / "real", 8, 1, 0.1f);
  HandcraftedExtractor ex;
  const auto rep = build_fid_report({{1.0, d / "real"}}, {{{"m", 1.0}, d / "real"}}, ex);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_LE(rep.rows[0].fid, 1e-6);
  EXPECT_EQ(rep.rows[0].n_real, 8u);
  EXPECT_EQ(report_csv(rep), "model,scale,fid,n_real,n_fake\nm,1.00,0.000000,8,8\n");
}

TEST(FidReport, TwoModelsThreeScalesSorted) {
  TempDir d("tryon_fid");
  std::map<double, fs::path> real;
  std::map<std::pair<std::string, double>, fs::path> fake;
  int s = 0;
  for (double scale : {1.0, 0.7, 0.5}) {
    const auto tag = format_scale(scale);
    write_noise_images(d / ("real" + tag), 6, 10 + s, 0.1f);
    real[scale] = d / ("real" + tag);
    for (const std::string m : {"crop", "baseline"}) {
      write_noise_images(d / (m + tag), 6, 100 + s, m == "crop" ? 0.15f : 0.3f);
      fake[{m, scale}] = d / (m + tag);
    }
    ++s;
  }
  HandcraftedExtractor ex;
  const auto rep = build_fid_report(real, fake, ex);
  ASSERT_EQ(rep.rows.size(), 6u);
  const std::vector<std::pair<std::string, double>> order{
      {"baseline", 0.5}, {"baseline", 0.7}, {"baseline", 1.0}, {"crop", 0.5}, {"crop", 0.7}, {"crop", 1.0}};
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(rep.rows[k].model, order[k].first);
    EXPECT_EQ(rep.rows[k].scale, order[k].second);
    EXPECT_GT(rep.rows[k].fid, 0.0);
  }
  const auto chart = chart_csv(rep);
  EXPECT_EQ(chart.substr(0, chart.find('\n')), "scale,baseline,crop");
  EXPECT_EQ(std::count(chart.begin(), chart.end(), '\n'), 4);

  const auto f1 = write_fid_report(rep, d / "r1");
  const auto f2 = write_fid_report(build_fid_report(real, fake, ex), d / "r2");
  EXPECT_EQ(read_file(f1.table), read_file(f2.table));
  EXPECT_EQ(read_file(f1.chart_png), read_file(f2.chart_png));
  const ImageF png = read_png_rgb(f1.chart_png);
  EXPECT_EQ(png.width(), 640);
}

TEST(FidReport, EmptyOrMissingDirectoryIsDataError) {
  TempDir d("tryon_fid");
  write_noise_images(d / "real", 4, 1, 0.1f);
  fs::create_directories(d / "empty");
  HandcraftedExtractor ex;
  EXPECT_THROW(build_fid_report({{1.0, d / "real"}}, {{{"m", 1.0}, d / "empty"}}, ex), DataError);
  EXPECT_THROW(build_fid_report({{1.0, d / "empty"}}, {{{"m", 1.0}, d / "real"}}, ex), DataError);
  EXPECT_THROW(build_fid_report({{0.5, d / "real"}}, {{{"m", 1.0}, d / "real"}}, ex), DataError);
  EXPECT_THROW(build_fid_report({{1.0, d / "real"}}, {}, ex), DataError);
}

TEST(Checkpoint, FileHashIsStable) {
  TempDir d("tryon_hash");
  testing::write_file(d / "a.bin", "abc");
  EXPECT_EQ(file_hash(d / "a.bin"), "e71fa2190541574b");
  testing::write_file(d / "e.bin", "");
  EXPECT_EQ(file_hash(d / "e.bin"), "cbf29ce484222325");
}

}  // namespace
}  // namespace tryon
