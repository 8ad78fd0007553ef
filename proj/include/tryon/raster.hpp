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
#include <array>
#include <csetjmp>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <png.h>

#include "tryon/errors.hpp"

namespace tryon {

// Planar channel-major raster: element (c, i, j) lives at (c * H + i) * W + j.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int channels, int height, int width, T fill = T{})
      : channels_(channels), height_(height), width_(width),
        data_(static_cast<std::size_t>(channels) * height * width, fill) {
    if (channels < 1 || height < 1 || width < 1) {
      throw ShapeError("raster dimensions must be positive");
    }
  }

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int c, int i, int j) {
    return data_[(static_cast<std::size_t>(c) * height_ + i) * width_ + j];
  }
  const T& at(int c, int i, int j) const {
    return data_[(static_cast<std::size_t>(c) * height_ + i) * width_ + j];
  }
  T& operator()(int i, int j) { return at(0, i, j); }
  const T& operator()(int i, int j) const { return at(0, i, j); }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool same_size(int h, int w) const noexcept {
    return height_ == h && width_ == w;
  }
  template <typename U>
  bool same_size(const Raster<U>& o) const noexcept {
    return height_ == o.height() && width_ == o.width();
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.channels_ == b.channels_ && a.height_ == b.height_ &&
           a.width_ == b.width_ && a.data_ == b.data_;
  }

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using ImageF = Raster<float>;
using LabelRaster = Raster<std::uint8_t>;

// Axis-aligned source region used by the resamplers.
struct Region {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

inline Region full_region(int h, int w) { return {0, 0, h, w}; }

// Source row/column picked for output index `o` under nearest-neighbour
// resampling of `extent` source pixels onto `out` pixels. Pixel centres are
// mapped affinely, then floor(coord + 0.5); done in integers so it is exact:
//   offset + floor((2o + 1) * extent / (2 * out)).
inline int nearest_source_index(int o, int offset, int extent, int out) {
  const std::int64_t num = (2 * static_cast<std::int64_t>(o) + 1) * extent;
  const auto idx = static_cast<int>(num / (2 * static_cast<std::int64_t>(out)));
  return offset + std::clamp(idx, 0, extent - 1);
}

// Continuous source coordinate (pixel-centre convention) for output index o.
// Clamped to [lo, hi].
inline double bilinear_source_coord(int o, int offset, int extent, int out, int lo, int hi) {
  const double c = offset + (static_cast<double>(2 * o + 1) * extent - out) /
                                (2.0 * out);
  return std::clamp(c, static_cast<double>(lo), static_cast<double>(hi));
}

inline double bilinear_source_coord(int o, int offset, int extent, int out) {
  return bilinear_source_coord(o, offset, extent, out, offset, offset + extent - 1);
}

template <typename T>
Raster<T> resample_nearest(const Raster<T>& src, const Region& r, int out_h,
                           int out_w) {
  Raster<T> out(src.channels(), out_h, out_w);
  std::vector<int> cols(out_w);
  for (int j = 0; j < out_w; ++j) cols[j] = nearest_source_index(j, r.left, r.width, out_w);
  for (int c = 0; c < src.channels(); ++c) {
    for (int i = 0; i < out_h; ++i) {
      const int si = nearest_source_index(i, r.top, r.height, out_h);
      for (int j = 0; j < out_w; ++j) out.at(c, i, j) = src.at(c, si, cols[j]);
    }
  }
  return out;
}

// Row c, i of a raster; resample_bilinear reads sources through this.
template <typename T>
const T* pixel_row(const Raster<T>& r, int c, int i) {
  return &r.at(c, i, 0);
}

// Bilinear resampling of region r with taps clamped to `bounds`. Passing
// bounds == r matches crop-then-resize.
template <typename Src>
ImageF resample_bilinear(const Src& src, const Region& r, const Region& bounds, int out_h,
                         int out_w) {
  ImageF out(src.channels(), out_h, out_w);
  struct Tap {
    int i0, i1;
    float f;
  };
  auto taps = [](int offset, int extent, int lo, int n, int out_n) {
    std::vector<Tap> t(out_n);
    for (int o = 0; o < out_n; ++o) {
      const double s = bilinear_source_coord(o, offset, extent, out_n, lo, lo + n - 1);
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, lo + n - 1);
      t[o] = {i0, i1, static_cast<float>(s - i0)};
    }
    return t;
  };
  const auto ty = taps(r.top, r.height, bounds.top, bounds.height, out_h);
  const auto tx = taps(r.left, r.width, bounds.left, bounds.width, out_w);
  for (int c = 0; c < src.channels(); ++c) {
    for (int i = 0; i < out_h; ++i) {
      const Tap& y = ty[i];
      const auto r0 = pixel_row(src, c, y.i0);
      const auto r1 = pixel_row(src, c, y.i1);
      float* dst = &out.at(c, i, 0);
      for (int j = 0; j < out_w; ++j) {
        const Tap& x = tx[j];
        const float top = r0[x.i0] + x.f * (r0[x.i1] - r0[x.i0]);
        if (y.f == 0.0f) {
          dst[j] = top;
          continue;
        }
        const float bot = r1[x.i0] + x.f * (r1[x.i1] - r1[x.i0]);
        dst[j] = top + y.f * (bot - top);
      }
    }
  }
  return out;
}

template <typename Src>
ImageF resample_bilinear(const Src& src, const Region& r, int out_h, int out_w) {
  return resample_bilinear(src, r, r, out_h, out_w);
}

// ---------------------------------------------------------------------------
// PNG I/O. Continuous rasters are quantized to 8 bits on write; reading gives
// k / 255, so a write/read cycle of an already-quantized raster is exact.

inline float quantize_unit(float v) {
  return std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
}

namespace detail {

inline const std::array<float, 256>& unit_lut() {
  static const auto lut = [] {
    std::array<float, 256> t{};
    for (int k = 0; k < 256; ++k) t[k] = k / 255.0f;
    return t;
  }();
  return lut;
}

}  // namespace detail

// Interleaved 8-bit RGB as decoded; at() yields the same k / 255 values as
// the planar ImageF, so it can feed resample_bilinear directly.
struct Rgb8Image {
  std::vector<std::uint8_t> px;
  int rows = 0;
  int cols = 0;

  int channels() const { return 3; }
  int height() const { return rows; }
  int width() const { return cols; }
  float at(int c, int i, int j) const {
    return detail::unit_lut()[px[(static_cast<std::size_t>(i) * cols + j) * 3 + c]];
  }
  ImageF to_planar() const {
    ImageF out(3, rows, cols);
    const auto& lut = detail::unit_lut();
    for (int c = 0; c < 3; ++c) {
      float* dst = &out.at(c, 0, 0);
      const std::uint8_t* src = px.data() + c;
      for (std::size_t n = 0, e = static_cast<std::size_t>(rows) * cols; n < e; ++n) {
        dst[n] = lut[src[3 * n]];
      }
    }
    return out;
  }
};

struct Rgb8Row {
  const std::uint8_t* p;
  const float* lut;
  float operator[](int j) const { return lut[p[3 * j]]; }
};

inline Rgb8Row pixel_row(const Rgb8Image& img, int c, int i) {
  return {img.px.data() + static_cast<std::size_t>(i) * img.cols * 3 + c, detail::unit_lut().data()};
}

namespace detail {

// Failures surface as IoError or an OpenCV fallback; keep libpng quiet.
inline void png_quiet_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }
inline void png_quiet_warning(png_structp, png_const_charp) {}

// Raw 8-bit samples of a non-interlaced grey or RGB file, no colour or gamma
// transforms. Other formats return false and go through OpenCV.
inline bool decode_png8(const char* path, int want_channels, std::vector<std::uint8_t>& px,
                        int& rows, int& cols) {
  std::FILE* f = std::fopen(path, "rb");
  if (!f) return false;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(f);
    return false;
  }
  png_init_io(png, f);
  png_read_info(png, info);
  const int type = png_get_color_type(png, info);
  const bool ok = png_get_bit_depth(png, info) == 8 &&
                  png_get_interlace_type(png, info) == PNG_INTERLACE_NONE &&
                  (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_RGB) &&
                  (want_channels == 3 || type == PNG_COLOR_TYPE_GRAY);
  if (ok) {
    if (type == PNG_COLOR_TYPE_GRAY && want_channels == 3) png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    rows = static_cast<int>(png_get_image_height(png, info));
    cols = static_cast<int>(png_get_image_width(png, info));
    const std::size_t stride = static_cast<std::size_t>(cols) * want_channels;
    px.resize(stride * rows);
    for (int i = 0; i < rows; ++i) png_read_row(png, px.data() + i * stride, nullptr);
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(f);
  return ok;
}

}  // namespace detail

inline Rgb8Image read_png_rgb8(const std::filesystem::path& path) {
  Rgb8Image img;
  if (detail::decode_png8(path.string().c_str(), 3, img.px, img.rows, img.cols)) return img;
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw IoError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(m, rgb, cv::COLOR_BGR2RGB);
  img.rows = rgb.rows;
  img.cols = rgb.cols;
  img.px.resize(static_cast<std::size_t>(rgb.rows) * rgb.cols * 3);
  for (int i = 0; i < rgb.rows; ++i) {
    std::copy(rgb.ptr<std::uint8_t>(i), rgb.ptr<std::uint8_t>(i) + rgb.cols * 3,
              img.px.data() + static_cast<std::size_t>(i) * rgb.cols * 3);
  }
  return img;
}

inline ImageF read_png_rgb(const std::filesystem::path& path) {
  return read_png_rgb8(path).to_planar();
}

inline LabelRaster read_png_gray(const std::filesystem::path& path) {
  std::vector<std::uint8_t> px;
  int rows = 0, cols = 0;
  if (detail::decode_png8(path.string().c_str(), 1, px, rows, cols)) {
    LabelRaster out(1, rows, cols);
    out.data() = std::move(px);
    return out;
  }
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw IoError("cannot decode image " + path.string());
  if (m.depth() != CV_8U) throw IoError("expected 8-bit image " + path.string());
  if (m.channels() != 1) cv::extractChannel(m, m, 0);
  LabelRaster out(1, m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    const auto* row = m.ptr<std::uint8_t>(i);
    std::copy(row, row + m.cols, &out(i, 0));
  }
  return out;
}

inline void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

namespace detail {

// Only trivially destructible locals: libpng reports errors by longjmp.
inline bool encode_png(const char* path, const std::uint8_t* pixels, int height, int width,
                       int channels) {
  std::FILE* f = std::fopen(path, "wb");
  if (!f) return false;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    return false;
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, width, height, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 1);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_write_info(png, info);
  for (int i = 0; i < height; ++i) {
    png_write_row(png, pixels + static_cast<std::size_t>(i) * width * channels);
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return std::fclose(f) == 0;
}

inline void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
                      int height, int width, int channels) {
  ensure_parent(path);
  if (!encode_png(path.string().c_str(), pixels.data(), height, width, channels)) {
    throw IoError("cannot write image " + path.string());
  }
}

}  // namespace detail

inline void write_png_rgb(const std::filesystem::path& path, const ImageF& img) {
  if (img.channels() != 3) throw ShapeError("RGB write expects 3 channels");
  const std::size_t plane = img.plane_size();
  std::vector<std::uint8_t> px(plane * 3);
  for (int c = 0; c < 3; ++c) {
    const float* src = img.data().data() + c * plane;
    for (std::size_t n = 0; n < plane; ++n) {
      // Same as lround for the clamped, non-negative product; exact in double.
      const float v = std::clamp(src[n], 0.0f, 1.0f) * 255.0f;
      px[n * 3 + c] = static_cast<std::uint8_t>(static_cast<double>(v) + 0.5);
    }
  }
  detail::write_png(path, px, img.height(), img.width(), 3);
}

inline void write_png_gray(const std::filesystem::path& path, const LabelRaster& r) {
  detail::write_png(path, r.data(), r.height(), r.width(), 1);
}

}  // namespace tryon
