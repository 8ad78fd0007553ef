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
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

#include "tryon/errors.hpp"
#include "tryon/networks.hpp"

namespace tryon {

inline constexpr int kCheckpointFormat = 1;

// 64-bit FNV-1a over the file bytes, as 16 lowercase hex digits.
inline std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for hashing");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline nlohmann::json checkpoint_header(const std::string& stage, const NetConfig& net) {
  return {{"format", kCheckpointFormat}, {"stage", stage}, {"net", net.to_json()}};
}

template <typename M>
void save_checkpoint(const std::filesystem::path& path, const M& module, const std::string& stage,
                     const NetConfig& net) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  torch::serialize::OutputArchive ar;
  ar.write("header", c10::IValue(checkpoint_header(stage, net).dump()));
  module->save(ar);
  ar.save_to(path.string());
}

inline nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DependencyError("missing checkpoint " + path.string());
  }
  torch::serialize::InputArchive ar;
  try {
    ar.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IoError("unreadable checkpoint " + path.string());
  }
  c10::IValue v;
  if (!ar.try_read("header", v) || !v.isString()) {
    throw DependencyError("checkpoint " + path.string() + " has no header");
  }
  auto j = nlohmann::json::parse(v.toStringRef());
  if (j.value("format", 0) != kCheckpointFormat) {
    throw DependencyError("checkpoint " + path.string() + " has unsupported format");
  }
  return j;
}

// Loads parameters into `module`, refusing when the stored stage or network
// configuration differ from what the caller built.
template <typename M>
void load_checkpoint(const std::filesystem::path& path, M& module, const std::string& stage,
                     const NetConfig& net) {
  const auto header = read_checkpoint_header(path);
  const auto expected = checkpoint_header(stage, net);
  if (header != expected) {
    throw DependencyError("checkpoint " + path.string() + " config mismatch: stored " +
                          header.dump() + ", expected " + expected.dump());
  }
  torch::serialize::InputArchive ar;
  ar.load_from(path.string());
  module->load(ar);
}

}  // namespace tryon
