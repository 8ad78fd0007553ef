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

#include <string>

#include <torch/torch.h>

#include "tryon/errors.hpp"

namespace tryon {

// Thin-plate spline f: R^2 -> R^2 in normalized [-1,1] coordinates,
//   f(p) = A p + b + sum_k w_k U(|p - src_k|),  U(r) = r^2 log r^2.
// Tensors may carry leading batch dimensions on dst/affine/weights; src is
// shared. Coordinates are (x, y) with x along the width.
struct TpsParams {
  torch::Tensor src;      // [K, 2]
  torch::Tensor dst;      // [..., K, 2]
  torch::Tensor affine;   // [..., 2, 3]: [A | b]
  torch::Tensor weights;  // [..., K, 2]
  double reg = 0.0;

  int64_t num_points() const { return src.size(0); }
};

// U(|a_i - b_j|) for a [..., N, 2] and b [K, 2]; U(0) = 0 with a finite
// gradient.
inline torch::Tensor tps_kernel(const torch::Tensor& a, const torch::Tensor& b) {
  const torch::Tensor diff = a.unsqueeze(-2) - b;        // [..., N, K, 2]
  const torch::Tensor d2 = (diff * diff).sum(-1);        // [..., N, K]
  const torch::Tensor positive = d2 > 0;
  const torch::Tensor safe = torch::where(positive, d2, torch::ones_like(d2));
  return torch::where(positive, d2 * torch::log(safe), torch::zeros_like(d2));
}

// Canonical rows x cols control grid spanning [-1,1]^2, row-major, (x, y).
inline torch::Tensor canonical_control_points(int64_t rows = 5, int64_t cols = 5,
                                              torch::Dtype dtype = torch::kDouble) {
  const auto opts = torch::TensorOptions().dtype(dtype);
  const torch::Tensor ys = torch::linspace(-1.0, 1.0, rows, opts);
  const torch::Tensor xs = torch::linspace(-1.0, 1.0, cols, opts);
  const auto mesh = torch::meshgrid({ys, xs}, "ij");
  return torch::stack({mesh[1].reshape({-1}), mesh[0].reshape({-1})}, 1);
}

inline TpsParams solve_tps(const torch::Tensor& src, const torch::Tensor& dst, double reg = 0.0) {
  if (src.dim() != 2 || src.size(1) != 2 || src.size(0) < 3) {
    throw ShapeError("TPS needs K >= 3 source points of shape [K, 2]");
  }
  if (dst.dim() < 2 || dst.size(-1) != 2 || dst.size(-2) != src.size(0)) {
    throw ShapeError("TPS destination points must be [..., K, 2]");
  }
  if (reg < 0.0) throw ConfigError("TPS regularization must be >= 0");
  const int64_t K = src.size(0);
  const auto opts = src.options();

  torch::Tensor P = torch::cat({torch::ones({K, 1}, opts), src}, 1);  // [K, 3]
  if (torch::linalg_matrix_rank(P.to(torch::kDouble)).item<int64_t>() < 3) {
    throw SingularityError("TPS control points are collinear; the system is singular");
  }
  torch::Tensor L = torch::zeros({K + 3, K + 3}, opts);
  L.index_put_({torch::indexing::Slice(0, K), torch::indexing::Slice(0, K)},
               tps_kernel(src, src) + reg * torch::eye(K, opts));
  L.index_put_({torch::indexing::Slice(0, K), torch::indexing::Slice(K, K + 3)}, P);
  L.index_put_({torch::indexing::Slice(K, K + 3), torch::indexing::Slice(0, K)}, P.t());

  std::vector<int64_t> zshape(dst.sizes().begin(), dst.sizes().end());
  zshape[zshape.size() - 2] = 3;
  const torch::Tensor rhs = torch::cat({dst, torch::zeros(zshape, dst.options())}, -2);
  const auto [sol, info] = torch::linalg_solve_ex(L, rhs);
  if (info.any().item<bool>() || !torch::isfinite(sol).all().item<bool>()) {
    throw SingularityError("TPS system is singular at reg=" + std::to_string(reg) +
                           "; use reg > 0");
  }
  TpsParams p;
  p.src = src;
  p.dst = dst;
  p.reg = reg;
  p.weights = sol.narrow(-2, 0, K);
  const torch::Tensor a = sol.narrow(-2, K, 3);  // rows: const, x-coef, y-coef
  // [A | b] with A(o, 0) = a[1][o], A(o, 1) = a[2][o], b(o) = a[0][o].
  p.affine = torch::cat({a.narrow(-2, 1, 2), a.narrow(-2, 0, 1)}, -2).transpose(-1, -2);
  return p;
}

// f at points [..., N, 2].
inline torch::Tensor tps_apply(const TpsParams& p, const torch::Tensor& pts) {
  const torch::Tensor lin = p.affine.narrow(-1, 0, 2);  // [..., 2, 2]
  const torch::Tensor b = p.affine.select(-1, 2);       // [..., 2]
  return torch::matmul(pts, lin.transpose(-1, -2)) + b.unsqueeze(-2) +
         torch::matmul(tps_kernel(pts, p.src), p.weights);
}

// Pixel centres of an H x W raster in normalized coordinates, [H, W, 2].
inline torch::Tensor canonical_mesh(int64_t H, int64_t W, torch::TensorOptions opts = torch::kDouble) {
  const torch::Tensor ys = (torch::arange(H, opts) * 2 + 1) / static_cast<double>(H) - 1;
  const torch::Tensor xs = (torch::arange(W, opts) * 2 + 1) / static_cast<double>(W) - 1;
  const auto mesh = torch::meshgrid({ys, xs}, "ij");
  return torch::stack({mesh[1], mesh[0]}, -1);
}

// coords(i, j) = f(g(i, j)), [..., H, W, 2].
inline torch::Tensor make_sampling_grid(const TpsParams& p, int64_t H, int64_t W) {
  const torch::Tensor g = canonical_mesh(H, W, p.src.options()).reshape({H * W, 2});
  torch::Tensor out = tps_apply(p, g);
  std::vector<int64_t> shape(out.sizes().begin(), out.sizes().end() - 2);
  shape.insert(shape.end(), {H, W, 2});
  return out.reshape(shape);
}

// Bilinear sampling with border-clamp padding; differentiable in both image
// and grid. image [B, C, H, W] (or [C, H, W]), grid [B, Ho, Wo, 2].
inline torch::Tensor warp_image(const torch::Tensor& image, const torch::Tensor& grid) {
  namespace F = torch::nn::functional;
  const bool unbatched = image.dim() == 3;
  const torch::Tensor img = unbatched ? image.unsqueeze(0) : image;
  const torch::Tensor g = grid.dim() == 3 ? grid.unsqueeze(0) : grid;
  if (img.dim() != 4 || g.dim() != 4 || g.size(-1) != 2 || g.size(0) != img.size(0)) {
    throw ShapeError("warp_image expects image [B,C,H,W] and grid [B,H,W,2]");
  }
  torch::Tensor out = F::grid_sample(img, g.to(img.scalar_type()),
                                     F::GridSampleFuncOptions()
                                         .mode(torch::kBilinear)
                                         .padding_mode(torch::kBorder)
                                         .align_corners(false));
  return unbatched ? out.squeeze(0) : out;
}

// sum_o w_o^T K w_o over both output coordinates, [...].
inline torch::Tensor bending_energy(const TpsParams& p) {
  const torch::Tensor kmat = tps_kernel(p.src, p.src);
  return (p.weights * torch::matmul(kmat, p.weights)).sum({-2, -1});
}

}  // namespace tryon
