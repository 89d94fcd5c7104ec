#pragma once

#include <string>
#include <vector>

#include "resim/vec.hpp"

namespace resim {

// Row-major H x W x C raster of doubles, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

  double& at(int x, int y, int c) { return data[(size_t(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return data[(size_t(y) * width + x) * channels + c]; }

  Vec3 rgb(int x, int y) const {
    size_t i = (size_t(y) * width + x) * channels;
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set_rgb(int x, int y, Vec3 v) {
    size_t i = (size_t(y) * width + x) * channels;
    data[i] = v.x;
    data[i + 1] = v.y;
    data[i + 2] = v.z;
  }

  size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// PNG I/O. 1-channel images map to grayscale, 3-channel to RGB.
// Values are clamped to [0,1] and quantized; bit_depth is 8 or 16.
void save_png(const Image& img, const std::string& path, int bit_depth = 8);
Image load_png(const std::string& path);

}  // namespace resim
