// Copyright Contributors to the nrr Project
// SPDX-License-Identifier: Apache-2.0
#include "nrr/image.h"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nrr {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::filesystem::path& path, const char* what) {
  throw std::runtime_error(std::string(what) + ": " + path.string());
}

// Decodes any 8/16-bit PNG into 8-bit RGB rows.
std::vector<std::vector<png_byte>> read_png_rows(const std::filesystem::path& path, int* w,
                                                 int* h) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) fail(path, "cannot open PNG");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "failed to decode PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  *w = static_cast<int>(png_get_image_width(png, info));
  *h = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  std::vector<std::vector<png_byte>> rows(*h);
  const size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_bytep> row_ptrs(*h);
  for (int y = 0; y < *h; ++y) {
    rows[y].resize(rowbytes);
    row_ptrs[y] = rows[y].data();
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return rows;
}

void write_png_rows(const std::filesystem::path& path, int w, int h, int channels,
                    const std::vector<png_byte>& bytes) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) fail(path, "cannot open PNG for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "failed to encode PNG");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> row_ptrs(h);
  for (int y = 0; y < h; ++y)
    row_ptrs[y] = const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * w * channels);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

png_byte quantize(double v) {
  const double c = std::min(std::max(v, 0.0), 1.0);
  return static_cast<png_byte>(c * 255.0 + 0.5);
}

constexpr char kFlowMagic[8] = {'N', 'R', 'R', 'F', 'L', 'O', '1', '\0'};
constexpr char kCseMagic[8] = {'N', 'R', 'R', 'C', 'S', 'E', '1', '\0'};

void write_header(std::ofstream& out, const char* magic, uint32_t w, uint32_t h) {
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
}

void read_header(std::ifstream& in, const std::filesystem::path& path, const char* magic,
                 uint32_t* w, uint32_t* h) {
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0) fail(path, "bad raster magic");
  in.read(reinterpret_cast<char*>(w), 4);
  in.read(reinterpret_cast<char*>(h), 4);
  if (!in) fail(path, "truncated raster header");
}

}  // namespace

ImageRGB read_png_rgb(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto rows = read_png_rows(path, &w, &h);
  ImageRGB img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.px(x, y)[c] = rows[y][3 * x + c] / 255.0;
  return img;
}

ImageGray read_png_gray(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto rows = read_png_rows(path, &w, &h);
  ImageGray img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.px(x, y)[0] = (rows[y][3 * x] + rows[y][3 * x + 1] + rows[y][3 * x + 2]) / (3.0 * 255.0);
  return img;
}

void write_png_rgb(const std::filesystem::path& path, const ImageRGB& img) {
  std::vector<png_byte> bytes(img.pixel_count() * 3);
  for (size_t i = 0; i < img.pixel_count() * 3; ++i) bytes[i] = quantize(img.data[i]);
  write_png_rows(path, img.width, img.height, 3, bytes);
}

void write_png_gray(const std::filesystem::path& path, const ImageGray& img) {
  std::vector<png_byte> bytes(img.pixel_count());
  for (size_t i = 0; i < img.pixel_count(); ++i) bytes[i] = quantize(img.data[i]);
  write_png_rows(path, img.width, img.height, 1, bytes);
}

void write_flow(const std::filesystem::path& path, const ImageFlow& flow) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open flow file for writing");
  write_header(out, kFlowMagic, static_cast<uint32_t>(flow.width),
               static_cast<uint32_t>(flow.height));
  for (size_t i = 0; i < flow.pixel_count() * 2; ++i) {
    const float v = static_cast<float>(flow.data[i]);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
}

ImageFlow read_flow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open flow file");
  uint32_t w = 0, h = 0;
  read_header(in, path, kFlowMagic, &w, &h);
  ImageFlow flow(static_cast<int>(w), static_cast<int>(h));
  for (size_t i = 0; i < flow.pixel_count() * 2; ++i) {
    float v = 0.0f;
    in.read(reinterpret_cast<char*>(&v), 4);
    flow.data[i] = v;
  }
  if (!in) fail(path, "truncated flow file");
  return flow;
}

void write_cse(const std::filesystem::path& path, const CseMap& cse) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open CSE file for writing");
  write_header(out, kCseMagic, static_cast<uint32_t>(cse.width),
               static_cast<uint32_t>(cse.height));
  for (size_t i = 0; i < cse.valid.size(); ++i) {
    out.write(reinterpret_cast<const char*>(cse.points.data() + 3 * i), 12);
    out.write(reinterpret_cast<const char*>(&cse.valid[i]), 1);
  }
}

CseMap read_cse(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open CSE file");
  uint32_t w = 0, h = 0;
  read_header(in, path, kCseMagic, &w, &h);
  CseMap cse(static_cast<int>(w), static_cast<int>(h));
  for (size_t i = 0; i < cse.valid.size(); ++i) {
    in.read(reinterpret_cast<char*>(cse.points.data() + 3 * i), 12);
    in.read(reinterpret_cast<char*>(&cse.valid[i]), 1);
  }
  if (!in) fail(path, "truncated CSE file");
  return cse;
}

ImageGray dilate_mask(const ImageGray& mask, double radius) {
  ImageGray out(mask.width, mask.height);
  const int r = static_cast<int>(std::ceil(radius));
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      double v = 0.0;
      for (int dy = -r; dy <= r && v < 0.5; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          const int sx = x + dx, sy = y + dy;
          if (sx < 0 || sy < 0 || sx >= mask.width || sy >= mask.height) continue;
          if (mask.px(sx, sy)[0] >= 0.5) {
            v = 1.0;
            break;
          }
        }
      }
      out.px(x, y)[0] = v;
    }
  }
  return out;
}

}  // namespace nrr
