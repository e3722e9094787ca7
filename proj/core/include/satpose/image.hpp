#ifndef SATPOSE_IMAGE_HPP
#define SATPOSE_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "satpose/errors.hpp"

namespace satpose {

/// 8-bit grayscale image, row-major.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  ImageU8() = default;
  ImageU8(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h),
        pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }

  bool same_size(const ImageU8& o) const {
    return width == o.width && height == o.height;
  }
  bool operator==(const ImageU8&) const = default;
};

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::string& path, const ImageU8& img);
ImageU8 read_pgm(const std::string& path);

/// Binary PBM (P4), 1 bit per pixel. In memory masks use 0/1 values;
/// PBM's convention of 1 = black is mapped to mask value 1.
void write_pbm(const std::string& path, const ImageU8& mask);
ImageU8 read_pbm(const std::string& path);

}  // namespace satpose

#endif  // SATPOSE_IMAGE_HPP
