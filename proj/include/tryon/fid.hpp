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
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tryon/errors.hpp"
#include "tryon/raster.hpp"

namespace tryon {

// Gaussian fit of a feature distribution. Covariance is unbiased (n - 1).
struct FidStats {
  std::size_t n = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::string extractor_id;

  Eigen::Index dim() const { return mean.size(); }
};

// Streaming mean / co-moment accumulator (Chan et al. pairwise update), so
// shards can be merged in any grouping.
class FidAccumulator {
 public:
  FidAccumulator(std::string extractor_id, Eigen::Index dim)
      : id_(std::move(extractor_id)),
        mean_(Eigen::VectorXd::Zero(dim)),
        comoment_(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(const Eigen::VectorXd& x) {
    if (x.size() != mean_.size()) throw ShapeError("feature dimension mismatch");
    ++n_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    comoment_.noalias() += delta * (x - mean_).transpose();
  }

  void merge(const FidAccumulator& o) {
    if (o.id_ != id_ || o.mean_.size() != mean_.size()) {
      throw ComparabilityError("cannot merge statistics from different extractors");
    }
    if (o.n_ == 0) return;
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const Eigen::VectorXd delta = o.mean_ - mean_;
    mean_ += delta * (nb / n);
    comoment_ += o.comoment_ + delta * delta.transpose() * (na * nb / n);
    n_ += o.n_;
  }

  std::size_t count() const { return n_; }

  FidStats stats() const {
    if (n_ < 2) throw InsufficientDataError("FID statistics need at least 2 images");
    Eigen::MatrixXd cov = comoment_ / static_cast<double>(n_ - 1);
    cov = 0.5 * (cov + cov.transpose());
    return {n_, mean_, cov, id_};
  }

  static FidAccumulator from_stats(const FidStats& s) {
    FidAccumulator a(s.extractor_id, s.dim());
    a.n_ = s.n;
    a.mean_ = s.mean;
    a.comoment_ = s.cov * static_cast<double>(s.n - 1);
    return a;
  }

 private:
  std::string id_;
  std::size_t n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd comoment_;
};

inline FidStats merge_stats(const FidStats& a, const FidStats& b) {
  FidAccumulator acc = FidAccumulator::from_stats(a);
  acc.merge(FidAccumulator::from_stats(b));
  return acc.stats();
}

// Square root of a symmetric PSD matrix; negative eigenvalues clamp to 0.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

namespace detail {

inline double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd ra = sqrtm_psd(a);
  const Eigen::MatrixXd m = ra * b * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::nan("");
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace detail

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), clamped to
// be non-negative. When the root is not finite, 1e-6 is added to both
// diagonals and the root recomputed.
inline double frechet_distance(const FidStats& a, const FidStats& b) {
  if (a.extractor_id != b.extractor_id) {
    throw ComparabilityError("extractor mismatch: '" + a.extractor_id + "' vs '" +
                             b.extractor_id + "'");
  }
  if (a.dim() != b.dim()) throw ComparabilityError("feature dimensions differ");
  if (a.n < 2 || b.n < 2) throw InsufficientDataError("FID statistics need n >= 2");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  double tr = detail::trace_sqrt_product(a.cov, b.cov);
  if (!std::isfinite(tr)) {
    const Eigen::MatrixXd eps = 1e-6 * Eigen::MatrixXd::Identity(a.dim(), a.dim());
    tr = detail::trace_sqrt_product(a.cov + eps, b.cov + eps);
    if (!std::isfinite(tr)) throw NumericError("matrix square root failed");
  }
  const double d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr;
  return std::max(d, 0.0);
}

// ---------------------------------------------------------------------------
// Feature extractors.

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string id() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual Eigen::VectorXd extract(const ImageF& rgb) const = 0;
};

// 4x4 grid of luminance patch means (16) followed by a 16-bin histogram per
// RGB channel (48): 64 dims, no learned weights.
class HandcraftedExtractor final : public FeatureExtractor {
 public:
  static constexpr int kGrid = 4;
  static constexpr int kBins = 16;

  std::string id() const override { return "handcrafted-patch-hist-v1"; }
  Eigen::Index dim() const override { return kGrid * kGrid + 3 * kBins; }

  Eigen::VectorXd extract(const ImageF& img) const override {
    if (img.channels() != 3) throw ShapeError("extractor expects RGB input");
    const int H = img.height(), W = img.width();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(dim());
    Eigen::VectorXd cells = Eigen::VectorXd::Zero(kGrid * kGrid);
    for (int i = 0; i < H; ++i) {
      const int gi = i * kGrid / H;
      for (int j = 0; j < W; ++j) {
        const int gj = j * kGrid / W;
        const double r = img.at(0, i, j), g = img.at(1, i, j), b = img.at(2, i, j);
        f[gi * kGrid + gj] += 0.299 * r + 0.587 * g + 0.114 * b;
        cells[gi * kGrid + gj] += 1.0;
        for (int c = 0; c < 3; ++c) {
          const double v = std::clamp(static_cast<double>(img.at(c, i, j)), 0.0, 1.0);
          const int bin = std::min(kBins - 1, static_cast<int>(v * kBins));
          f[kGrid * kGrid + c * kBins + bin] += 1.0;
        }
      }
    }
    for (int k = 0; k < kGrid * kGrid; ++k) f[k] /= std::max(cells[k], 1.0);
    f.tail(3 * kBins) /= static_cast<double>(H) * W;
    return f;
  }
};

inline std::unique_ptr<FeatureExtractor> make_extractor(const std::string& name) {
  if (name == "handcrafted" || name == HandcraftedExtractor{}.id()) {
    return std::make_unique<HandcraftedExtractor>();
  }
  throw ConfigError("unknown feature extractor '" + name + "'");
}

template <typename Range>
FidStats accumulate_fid_stats(const Range& images, const FeatureExtractor& ex) {
  FidAccumulator acc(ex.id(), ex.dim());
  for (const ImageF& img : images) acc.add(ex.extract(img));
  return acc.stats();
}

inline std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("missing image directory " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no PNG images in " + dir.string());
  return out;
}

inline FidStats fid_stats_for_dir(const std::filesystem::path& dir, const FeatureExtractor& ex) {
  FidAccumulator acc(ex.id(), ex.dim());
  for (const auto& p : list_pngs(dir)) acc.add(ex.extract(read_png_rgb(p)));
  return acc.stats();
}

}  // namespace tryon
