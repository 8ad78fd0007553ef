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

#include <cstdlib>

#include "test_util.hpp"
#include "tryon/config.hpp"

namespace tryon {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(RunConfig, DefaultsCarryDefaultProvenance) {
  RunConfig rc;
  EXPECT_EQ(rc.get<double>("train.lr"), 2e-4);
  EXPECT_EQ(rc.get<int>("train.batch_size"), 4);
  EXPECT_EQ(rc.get<std::string>("train.gan_loss"), "hinge");
  EXPECT_FALSE(rc.get<bool>("net.latent_noise"));
  EXPECT_EQ(rc.entry("train.lr").source, Provenance::kDefault);
  EXPECT_NEAR(rc.get<double>("crop.ratio_hi"), 4.0 / 3.0, 1e-15);
}

TEST(RunConfig, FlagsOverrideFileOverrideDefaults) {
  TempDir d;
  write_file(d / "c.toml", "# comment\n[train]\nlr = 0.001   # inline\nseed = 3\n[crop]\nout_h = \"64\"\n");
  RunConfig rc;
  rc.load_file(d / "c.toml");
  rc.set_assignment("train.seed=9");
  EXPECT_EQ(rc.get<double>("train.lr"), 0.001);
  EXPECT_EQ(rc.entry("train.lr").source, Provenance::kFile);
  EXPECT_EQ(rc.get<int>("train.seed"), 9);
  EXPECT_EQ(rc.entry("train.seed").source, Provenance::kFlag);
  EXPECT_EQ(rc.get<int>("crop.out_h"), 64);
  EXPECT_EQ(rc.entry("crop.out_w").source, Provenance::kDefault);
}

TEST(RunConfig, UnknownKeysRejected) {
  TempDir d;
  write_file(d / "bad.toml", "[train]\nlearning_rate = 0.1\n");
  RunConfig rc;
  EXPECT_THROW(rc.load_file(d / "bad.toml"), ConfigError);
  EXPECT_THROW(rc.set_assignment("nope.key=1"), ConfigError);
  EXPECT_THROW(rc.set_assignment("train.lr"), ConfigError);
  write_file(d / "top.toml", "lr = 1\n");
  EXPECT_THROW(rc.load_file(d / "top.toml"), ConfigError);
}

TEST(RunConfig, BadValuesRejectedOnRead) {
  RunConfig rc;
  rc.set_assignment("train.batch_size=four");
  EXPECT_THROW(rc.get<int>("train.batch_size"), ConfigError);
  rc.set_assignment("net.latent_noise=maybe");
  EXPECT_THROW(rc.get<bool>("net.latent_noise"), ConfigError);
}

TEST(RunConfig, EnvOverridesDataRootOnly) {
  RunConfig rc;
  ::setenv(kDataRootEnv, "/tmp/somewhere", 1);
  rc.apply_env();
  ::unsetenv(kDataRootEnv);
  EXPECT_EQ(rc.get<std::string>("data.root"), "/tmp/somewhere");
  EXPECT_EQ(rc.entry("data.root").source, Provenance::kEnv);
  rc.set_assignment("data.root=/x");
  EXPECT_EQ(rc.get<std::string>("data.root"), "/x");
}

TEST(RunConfig, DumpIsDeterministicAndReloadable) {
  TempDir d;
  RunConfig rc;
  rc.set_assignment("train.lr=0.003");
  rc.set_assignment("train.perceptual_model=/a b/c.pt");
  const std::string text = rc.dump();
  EXPECT_EQ(text, rc.dump());
  EXPECT_NE(text.find("lr = \"0.003\"  # flag"), std::string::npos);
  EXPECT_NE(text.find("[train]"), std::string::npos);
  write_file(d / "resolved.toml", text);
  RunConfig back;
  back.load_file(d / "resolved.toml");
  for (const auto& [k, e] : rc.entries()) EXPECT_EQ(back.entry(k).value, e.value) << k;
}

TEST(RunConfig, ShippedToyConfigLoads) {
  RunConfig rc;
  rc.load_file(TRYON_SOURCE_DIR "/configs/toy.toml");
  EXPECT_EQ(rc.get<int>("crop.out_h"), 64);
  EXPECT_EQ(rc.get<int>("net.base_channels"), 8);
}

}  // namespace
}  // namespace tryon
