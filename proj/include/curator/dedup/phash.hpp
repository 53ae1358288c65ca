#pragma once

#include <array>

#include "curator/core/io.hpp"
#include "curator/core/types.hpp"
#include "curator/image/codec.hpp"

namespace curator::dedup {

inline constexpr int kThumbnailSide = 32;
inline constexpr int kLowFrequencySide = 8;

// 64-bit DCT perceptual hash:
//   decode -> BT.601 luma -> area-average to 32x32 -> orthonormal 2-D DCT-II
//   -> top-left 8x8 block -> lower median of the 64 coefficients
//   -> bit i = coeff_i > median.
// Coefficient i is row-major (vertical frequency major) and lands on bit
// (63 - i), so the hex rendering reads in the same order. Coefficients are
// quantised to 1e-6 before the comparison, which keeps the hash independent
// of floating-point summation order (a constant image has AC terms that are
// exactly zero, not rounding noise).
//
// Throws DecodeError.
PerceptualHash phash64(ByteView image_bytes);
PerceptualHash phash64(const image::RgbImage& image);

// The 32x32 luma thumbnail the hash is computed from.
image::GrayImage hash_thumbnail(const image::RgbImage& image);

// Hash from an already-prepared 32x32 luma thumbnail.
PerceptualHash phash_from_thumbnail(const image::GrayImage& thumbnail);

// The quantised low-frequency block (units of 1e-6) for inspection and tests.
std::array<long long, 64> low_frequency_block(const image::GrayImage& thumbnail);

}  // namespace curator::dedup
