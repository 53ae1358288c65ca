#pragma once

#include <cstdint>

#include "curator/image/codec.hpp"

namespace curator::image {

// Deterministic test-pattern image: a few low-frequency colour waves plus
// solid rectangles, all drawn from `seed`. Distinct seeds give visually
// distinct images, which makes the output usable as a stand-in corpus.
RgbImage synthetic_image(std::uint64_t seed, int width = 96, int height = 96);

// Returns a copy with every channel shifted by `delta` (saturating).
RgbImage brighten(const RgbImage& image, int delta);

}  // namespace curator::image
