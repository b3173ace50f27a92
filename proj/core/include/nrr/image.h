// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace nrr {

// Planar double-precision rasters. Values in [0, 1] for color/mask data.
template <int Channels>
struct Image {
  int width = 0, height = 0;
  std::vector<double> data;  // row-major, interleaved channels

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * Channels, 0.0) {}

  double* px(int x, int y) { return data.data() + (static_cast<size_t>(y) * width + x) * Channels; }
  const double* px(int x, int y) const {
    return data.data() + (static_cast<size_t>(y) * width + x) * Channels;
  }

  Eigen::Matrix<double, Channels, 1> at(int x, int y) const {
    return Eigen::Map<const Eigen::Matrix<double, Channels, 1>>(px(x, y));
  }
  void set(int x, int y, const Eigen::Matrix<double, Channels, 1>& v) {
    Eigen::Map<Eigen::Matrix<double, Channels, 1>>(px(x, y)) = v;
  }

  // Bilinear lookup at a continuous coordinate, clamped to the image border.
  Eigen::Matrix<double, Channels, 1> bilinear(double u, double v) const {
    const double x = std::min(std::max(u - 0.5, 0.0), width - 1.0);
    const double y = std::min(std::max(v - 0.5, 0.0), height - 1.0);
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
    const double ax = x - x0, ay = y - y0;
    return (1 - ax) * (1 - ay) * at(x0, y0) + ax * (1 - ay) * at(x1, y0) +
           (1 - ax) * ay * at(x0, y1) + ax * ay * at(x1, y1);
  }

  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

using ImageRGB = Image<3>;
using ImageGray = Image<1>;
using ImageFlow = Image<2>;  // pixel displacement toward the next frame

// Matched canonical surface point per pixel plus a validity byte.
struct CseMap {
  int width = 0, height = 0;
  std::vector<float> points;   // 3 per pixel
  std::vector<uint8_t> valid;  // 1 per pixel

  CseMap() = default;
  CseMap(int w, int h)
      : width(w), height(h), points(static_cast<size_t>(w) * h * 3, 0.0f),
        valid(static_cast<size_t>(w) * h, 0) {}

  bool is_valid(int x, int y) const { return valid[static_cast<size_t>(y) * width + x] != 0; }
  Eigen::Vector3d point(int x, int y) const {
    const float* p = points.data() + (static_cast<size_t>(y) * width + x) * 3;
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, const Eigen::Vector3d& p, bool ok) {
    float* dst = points.data() + (static_cast<size_t>(y) * width + x) * 3;
    dst[0] = static_cast<float>(p.x());
    dst[1] = static_cast<float>(p.y());
    dst[2] = static_cast<float>(p.z());
    valid[static_cast<size_t>(y) * width + x] = ok ? 1 : 0;
  }
};

// 8-bit PNG round trips. Color values are clamped to [0, 1] on write.
ImageRGB read_png_rgb(const std::filesystem::path& path);
ImageGray read_png_gray(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const ImageRGB& img);
void write_png_gray(const std::filesystem::path& path, const ImageGray& img);

// Binary flow raster: magic "NRRFLO1\0", u32 width, u32 height, then
// width*height little-endian float32 (dx, dy) pairs in row-major order.
void write_flow(const std::filesystem::path& path, const ImageFlow& flow);
ImageFlow read_flow(const std::filesystem::path& path);

// Binary CSE raster: magic "NRRCSE1\0", u32 width, u32 height, then
// width*height blocks of 3 little-endian float32 followed by one validity
// byte, row-major order.
void write_cse(const std::filesystem::path& path, const CseMap& cse);
CseMap read_cse(const std::filesystem::path& path);

// Binary disk dilation of a thresholded mask.
ImageGray dilate_mask(const ImageGray& mask, double radius);

}  // namespace nrr
