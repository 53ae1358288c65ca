#include "curator/dedup/phash.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "curator/core/errors.hpp"

namespace curator::dedup {
namespace {

constexpr int N = kThumbnailSide;
constexpr int K = kLowFrequencySide;

// First K rows of the orthonormal N-point DCT-II matrix.
struct DctBasis {
  std::array<std::array<double, N>, K> rows{};

  DctBasis() {
    for (int k = 0; k < K; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
      for (int n = 0; n < N; ++n) {
        rows[k][n] = scale * std::cos(std::numbers::pi * (2 * n + 1) * k / (2.0 * N));
      }
    }
  }
};

const DctBasis& basis() {
  static const DctBasis instance;
  return instance;
}

}  // namespace

std::array<long long, 64> low_frequency_block(const image::GrayImage& thumbnail) {
  if (thumbnail.width != N || thumbnail.height != N) {
    throw PreconditionError("perceptual hash needs a 32x32 thumbnail");
  }
  const auto& c = basis().rows;
  // tmp = C_K * A  (K x N): transform along columns first.
  std::array<std::array<double, N>, K> tmp{};
  for (int u = 0; u < K; ++u) {
    for (int x = 0; x < N; ++x) {
      double sum = 0.0;
      for (int y = 0; y < N; ++y) sum += c[u][y] * thumbnail(x, y);
      tmp[u][x] = sum;
    }
  }
  std::array<long long, 64> block{};
  for (int u = 0; u < K; ++u) {
    for (int v = 0; v < K; ++v) {
      double sum = 0.0;
      for (int x = 0; x < N; ++x) sum += tmp[u][x] * c[v][x];
      block[static_cast<std::size_t>(u * K + v)] = std::llround(sum * 1e6);
    }
  }
  return block;
}

PerceptualHash phash_from_thumbnail(const image::GrayImage& thumbnail) {
  const auto block = low_frequency_block(thumbnail);
  auto sorted = block;
  std::nth_element(sorted.begin(), sorted.begin() + 31, sorted.end());
  const long long median = sorted[31];  // lower median of 64 values
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    if (block[i] > median) bits |= std::uint64_t{1} << (63 - i);
  }
  return PerceptualHash{bits};
}

image::GrayImage hash_thumbnail(const image::RgbImage& image) {
  return image::area_resize(image::to_luma(image), N, N);
}

PerceptualHash phash64(const image::RgbImage& image) {
  return phash_from_thumbnail(hash_thumbnail(image));
}

PerceptualHash phash64(ByteView image_bytes) {
  return phash64(image::decode(image_bytes));
}

}  // namespace curator::dedup
