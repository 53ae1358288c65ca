#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "curator/core/io.hpp"

namespace curator::image {

// 8-bit interleaved RGB pixels, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // size = width * height * 3

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
};

// Single-channel real-valued image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Decodes any format the codec backend understands. Alpha is discarded and
// greyscale or 16-bit sources are widened/narrowed to 8-bit RGB.
// Throws DecodeError.
RgbImage decode(ByteView bytes);
bool is_decodable(ByteView bytes);

// ITU-R BT.601 luma: 0.299 R + 0.587 G + 0.114 B, unrounded.
GrayImage to_luma(const RgbImage& image);

// Area-averaging resample: every output pixel is the coverage-weighted mean
// of the source pixels its footprint overlaps. Works for up- and down-scaling.
GrayImage area_resize(const GrayImage& source, int width, int height);

Bytes encode_png(const RgbImage& image);
Bytes encode_jpeg(const RgbImage& image, int quality);

// File extension (without dot) guessed from magic bytes; "bin" if unknown.
std::string_view sniff_extension(ByteView bytes);

}  // namespace curator::image
