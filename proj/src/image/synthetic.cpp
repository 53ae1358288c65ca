#include "curator/image/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace curator::image {

namespace {

double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

RgbImage synthetic_image(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 1);
  struct Wave {
    double fx, fy, phase, amplitude;
  };
  std::array<std::array<Wave, 3>, 3> waves{};
  std::array<double, 3> base{};
  for (int c = 0; c < 3; ++c) {
    base[c] = 60.0 + 120.0 * unit(rng);
    for (auto& w : waves[c]) {
      w.fx = 0.5 + 3.0 * unit(rng);
      w.fy = 0.5 + 3.0 * unit(rng);
      w.phase = 2.0 * std::numbers::pi * unit(rng);
      w.amplitude = 15.0 + 35.0 * unit(rng);
    }
  }

  RgbImage image{width, height,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / width;
      const double v = static_cast<double>(y) / height;
      for (int c = 0; c < 3; ++c) {
        double value = base[c];
        for (const auto& w : waves[c]) {
          value += w.amplitude * std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
        }
        image.at(x, y)[c] = static_cast<std::uint8_t>(std::clamp(value, 0.0, 255.0));
      }
    }
  }

  const int rectangles = 2 + static_cast<int>(rng() % 3);
  for (int r = 0; r < rectangles; ++r) {
    const int x0 = static_cast<int>(unit(rng) * width * 0.7);
    const int y0 = static_cast<int>(unit(rng) * height * 0.7);
    const int x1 = std::min(width, x0 + 8 + static_cast<int>(unit(rng) * width * 0.4));
    const int y1 = std::min(height, y0 + 8 + static_cast<int>(unit(rng) * height * 0.4));
    const std::uint8_t colour[3] = {static_cast<std::uint8_t>(rng() & 0xFF),
                                    static_cast<std::uint8_t>(rng() & 0xFF),
                                    static_cast<std::uint8_t>(rng() & 0xFF)};
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) std::copy(colour, colour + 3, image.at(x, y));
    }
  }
  return image;
}

RgbImage brighten(const RgbImage& image, int delta) {
  RgbImage out = image;
  for (auto& p : out.pixels) p = static_cast<std::uint8_t>(std::clamp(p + delta, 0, 255));
  return out;
}

}  // namespace curator::image
