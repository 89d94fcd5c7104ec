#include <png.h>

#include <cstdio>
#include <memory>

#include "resim/error.hpp"
#include "resim/image.hpp"

namespace resim {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

int quantize(double v, int maxval) {
  if (v <= 0.0) return 0;
  if (v >= 1.0) return maxval;
  return int(v * maxval + 0.5);
}

}  // namespace

void save_png(const Image& img, const std::string& path, int bit_depth) {
  if (img.channels != 1 && img.channels != 3)
    throw ShapeError("save_png: image must have 1 or 3 channels");
  if (bit_depth != 8 && bit_depth != 16) throw IoError("save_png: bit depth must be 8 or 16");

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("save_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("save_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("save_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("save_png: libpng failure writing " + path);
  }

  png_init_io(png, f.get());
  int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width, img.height, bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int maxval = bit_depth == 8 ? 255 : 65535;
  const size_t stride = size_t(img.width) * img.channels * (bit_depth / 8);
  std::vector<unsigned char> row(stride);
  for (int y = 0; y < img.height; ++y) {
    unsigned char* p = row.data();
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        int v = quantize(img.at(x, y, c), maxval);
        if (bit_depth == 8) {
          *p++ = (unsigned char)v;
        } else {
          *p++ = (unsigned char)(v >> 8);  // PNG is big-endian
          *p++ = (unsigned char)(v & 0xff);
        }
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image load_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("load_png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("load_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("load_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_png: libpng failure reading " + path);
  }

  png_init_io(png, f.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);

  // Normalize exotic layouts to 8/16-bit gray or RGB.
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  int chans = png_get_channels(png, info);
  if (chans != 1 && chans != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_png: unsupported channel count in " + path);
  }

  Image img(int(w), int(h), chans);
  const double scale = bit_depth == 8 ? 1.0 / 255.0 : 1.0 / 65535.0;
  const size_t stride = size_t(w) * chans * (bit_depth / 8);
  std::vector<unsigned char> row(stride);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    const unsigned char* p = row.data();
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int c = 0; c < chans; ++c) {
        int v;
        if (bit_depth == 8) {
          v = *p++;
        } else {
          v = (int(p[0]) << 8) | int(p[1]);
          p += 2;
        }
        img.at(int(x), int(y), c) = v * scale;
      }
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace resim
