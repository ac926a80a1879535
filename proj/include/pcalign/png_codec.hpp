#pragma once

// Optional libpng-backed codec for the io module's registry. Include this
// header and call register_png_codec() to enable .png paths in
// load_image/save_image.

#include "pcalign/io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace pcalign {

class PngCodec : public ImageCodec {
 public:
  std::string extension() const override { return "png"; }

  Image load(const std::string& path) const override {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw ParseError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      if (png) png_destroy_read_struct(&png, &info, nullptr);
      std::fclose(fp);
      throw std::runtime_error("png: init failure");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_read_struct(&png, &info, nullptr);
      std::fclose(fp);
      throw ParseError("png: malformed file " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    Image img(static_cast<int>(w), static_cast<int>(h));
    std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (png_uint_32 x = 0; x < w; ++x)
        img.set_pixel(static_cast<int>(x), static_cast<int>(y),
                      Vec3(row[x * 3] / 255.0, row[x * 3 + 1] / 255.0,
                           row[x * 3 + 2] / 255.0));
    }
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
  }

  void save(const std::string& path, const Image& img) const override {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      if (png) png_destroy_write_struct(&png, &info);
      std::fclose(fp);
      throw std::runtime_error("png: init failure");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(fp);
      throw std::runtime_error("png: write failure " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        Vec3 c = img.pixel(x, y);
        row[static_cast<std::size_t>(x) * 3] = detail::quantize_u8(c.x());
        row[static_cast<std::size_t>(x) * 3 + 1] = detail::quantize_u8(c.y());
        row[static_cast<std::size_t>(x) * 3 + 2] = detail::quantize_u8(c.z());
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
  }
};

inline void register_png_codec() {
  for (const auto& c : codec_registry())
    if (c->extension() == "png") return;
  register_codec(std::make_shared<PngCodec>());
}

}  // namespace pcalign
