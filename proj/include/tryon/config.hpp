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
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tryon/errors.hpp"

namespace tryon {

// Where a resolved value came from. Later layers win.
enum class Provenance { kDefault, kFile, kEnv, kFlag };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kDefault: return "default";
    case Provenance::kFile: return "file";
    case Provenance::kEnv: return "env";
    case Provenance::kFlag: return "flag";
  }
  return "?";
}

struct ConfigKey {
  const char* key;
  const char* default_value;
  const char* help;
};

inline constexpr const char* kDataRootEnv = "TRYON_DATA_ROOT";

// Every accepted key; docs/config.md mirrors this table.
inline const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys{
      {"data.root", "", "dataset root (train/, test/, palette.json, pair lists)"},
      {"data.pose_sigma", "3.0", "pose heatmap Gaussian sigma in output pixels"},
      {"data.binarize_mask", "true", "threshold anti-aliased garment masks at 0.5"},
      {"agnostic.dilation_px", "8", "square dilation radius of the erased region"},
      {"agnostic.fill_value", "0.5", "grey level written into erased pixels"},
      {"agnostic.preserve_neck", "false", "keep neck pixels out of the erased region"},
      {"crop.scale_lo", "0.5", "lower bound of the crop area fraction"},
      {"crop.scale_hi", "1.0", "upper bound of the crop area fraction"},
      {"crop.ratio_lo", "0.75", "lower bound of the crop aspect ratio w/h"},
      {"crop.ratio_hi", "1.3333333333333333", "upper bound of the crop aspect ratio w/h"},
      {"crop.out_h", "512", "output height after resize"},
      {"crop.out_w", "384", "output width after resize"},
      {"crop.max_attempts", "10", "rejection-sampling attempts before the centre fallback"},
      {"crop.per_stage_independent", "false", "draw a separate window per training stage"},
      {"crop.crop_cloth", "false", "crop the garment image with the person window"},
      {"net.base_channels", "16", "channel width of the first level"},
      {"net.tps_rows", "5", "TPS control grid rows"},
      {"net.tps_cols", "5", "TPS control grid columns"},
      {"net.latent_noise", "false", "append a noise channel to generator inputs"},
      {"train.epochs", "1", "passes over the training pairs"},
      {"train.max_iters", "0", "iteration cap; > 0 overrides epochs"},
      {"train.batch_size", "4", "samples per optimizer step"},
      {"train.max_samples", "0", "keep only the first N training pairs; 0 keeps all"},
      {"train.lr", "0.0002", "Adam learning rate"},
      {"train.beta1", "0.5", "Adam beta1"},
      {"train.beta2", "0.999", "Adam beta2"},
      {"train.ce_weight", "1.0", "segmentation cross-entropy weight"},
      {"train.l1_weight", "1.0", "L1 reconstruction weight"},
      {"train.adv_weight", "0.1", "adversarial weight"},
      {"train.bend_weight", "0.01", "TPS bending energy weight"},
      {"train.perceptual_weight", "0.0", "perceptual loss weight; 0 disables it"},
      {"train.perceptual_model", "", "TorchScript feature network for the perceptual loss"},
      {"train.gan_loss", "hinge", "adversarial objective: hinge or bce"},
      {"train.num_workers", "1", "data-loading threads"},
      {"train.seed", "0", "seed for weights, ordering and crop windows"},
      {"eval.extractor", "handcrafted", "FID feature extractor"},
      {"eval.seed", "0", "seed for latent noise at inference"},
  };
  return keys;
}

class RunConfig {
 public:
  struct Entry {
    std::string value;
    Provenance source = Provenance::kDefault;
  };

  RunConfig() {
    for (const auto& k : config_schema()) entries_[k.key] = {k.default_value, Provenance::kDefault};
  }

  static bool known(const std::string& key) {
    const auto& s = config_schema();
    return std::any_of(s.begin(), s.end(), [&](const ConfigKey& k) { return key == k.key; });
  }

  void set(const std::string& key, const std::string& value, Provenance source) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    entries_[key] = {value, source};
  }

  // "section.key=value"
  void set_assignment(const std::string& kv, Provenance source = Provenance::kFlag) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("expected key=value, got '" + kv + "'");
    }
    set(trim(kv.substr(0, eq)), unquote(trim(kv.substr(eq + 1))), source);
  }

  // Sectioned key = value file; '#' and ';' start comments, values may be quoted.
  void load_file(const std::filesystem::path& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
      pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError("cannot parse config " + path.string() + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty()) {
        throw ConfigError("config " + path.string() + ": key '" + section + "' outside a section");
      }
      for (const auto& [name, leaf] : body) {
        set(section + "." + name, unquote(strip_comment(leaf.data())), Provenance::kFile);
      }
    }
  }

  void apply_env() {
    if (const char* root = std::getenv(kDataRootEnv); root && *root) {
      set("data.root", root, Provenance::kEnv);
    }
  }

  const Entry& entry(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  template <typename T>
  T get(const std::string& key) const {
    const std::string& v = entry(key).value;
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
      if (v == "false" || v == "0" || v == "no" || v == "off") return false;
      throw ConfigError(key + ": expected a boolean, got '" + v + "'");
    } else {
      try {
        return boost::lexical_cast<T>(v);
      } catch (const boost::bad_lexical_cast&) {
        throw ConfigError(key + ": cannot parse '" + v + "'");
      }
    }
  }

  // Resolved configuration, one "key = value  # source" line per key,
  // grouped into sections. Re-readable by load_file.
  std::string dump() const {
    std::ostringstream os;
    std::string section;
    for (const auto& [key, e] : entries_) {
      const std::string sec = key.substr(0, key.find('.'));
      if (sec != section) {
        os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
        section = sec;
      }
      os << key.substr(key.find('.') + 1) << " = \"" << e.value << "\"  # "
         << provenance_name(e.source) << "\n";
    }
    return os.str();
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }
  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k] == '"') quoted = !quoted;
      if (!quoted && s[k] == '#') return trim(s.substr(0, k));
    }
    return trim(s);
  }
  static std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
      return s.substr(1, s.size() - 2);
    }
    return s;
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace tryon
