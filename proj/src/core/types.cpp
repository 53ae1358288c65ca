#include "curator/core/types.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "curator/core/errors.hpp"

namespace curator {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<SimilarityBucket> kBuckets = {
    {BucketLabel::Dropped, -kInf, 51.5}, {BucketLabel::Bronze, 51.5, 52.5},
    {BucketLabel::Silver, 52.5, 53.5},   {BucketLabel::Gold, 53.5, 54.5},
    {BucketLabel::Platinum, 54.5, 55.5}, {BucketLabel::Diamond, 55.5, kInf},
};

constexpr std::array<std::string_view, kBucketCount> kBucketNames = {
    "Dropped", "Bronze", "Silver", "Gold", "Platinum", "Diamond"};

template <typename T>
EmbeddingVector normalize_impl(std::span<const T> raw) {
  std::vector<double> wide(raw.begin(), raw.end());
  return normalize(std::span<const double>(wide));
}

}  // namespace

std::string_view to_string(Source source) {
  return source == Source::crawled ? "crawled" : "crowdsourced";
}

std::optional<Source> parse_source(std::string_view text) {
  if (text == "crawled") return Source::crawled;
  if (text == "crowdsourced") return Source::crowdsourced;
  return std::nullopt;
}

std::string_view to_string(BucketLabel label) {
  return kBucketNames[static_cast<std::size_t>(label)];
}

std::optional<BucketLabel> parse_bucket_label(std::string_view text) {
  for (std::size_t i = 0; i < kBucketNames.size(); ++i) {
    if (kBucketNames[i] == text) return static_cast<BucketLabel>(i);
  }
  return std::nullopt;
}

const std::vector<SimilarityBucket>& similarity_buckets() {
  return kBuckets;
}

const SimilarityBucket& bucket_of(BucketLabel label) {
  return kBuckets[static_cast<std::size_t>(label)];
}

double to_centi_score(double score) {
  if (!std::isfinite(score)) return score * 100.0;
  return std::round(score * 100.0 * 1e9) / 1e9;
}

const SimilarityBucket& assign_bucket(double score) {
  const double centi = to_centi_score(score);
  // NaN has no order; send it to the floor bucket so the mapping stays total.
  if (std::isnan(centi)) return kBuckets.front();
  for (auto it = kBuckets.rbegin(); it != kBuckets.rend(); ++it) {
    if (centi >= it->lower) return *it;
  }
  return kBuckets.front();
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values) {
  if (values.empty()) throw NormalizationError("embedding has zero dimensions");
  double sum_sq = 0.0;
  for (const float v : values) {
    if (!std::isfinite(v)) throw NormalizationError("embedding has a non-finite entry");
    sum_sq += static_cast<double>(v) * v;
  }
  if (std::abs(std::sqrt(sum_sq) - 1.0) > kNormTolerance) {
    throw NormalizationError(fmt::format("embedding norm {} is not 1", std::sqrt(sum_sq)));
  }
  return EmbeddingVector(std::move(values));
}

EmbeddingVector normalize(std::span<const double> raw) {
  if (raw.empty()) throw NormalizationError("cannot normalize an empty vector");
  double sum_sq = 0.0;
  for (const double v : raw) {
    if (!std::isfinite(v)) throw NormalizationError("vector has a non-finite entry");
    sum_sq += v * v;
  }
  if (sum_sq == 0.0) throw NormalizationError("cannot normalize the zero vector");
  if (!std::isfinite(sum_sq)) {
    // Entries large enough to overflow the square: rescale first.
    const double peak = std::abs(*std::max_element(
        raw.begin(), raw.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }));
    std::vector<double> scaled(raw.begin(), raw.end());
    for (double& v : scaled) v /= peak;
    return normalize(std::span<const double>(scaled));
  }
  const double norm = std::sqrt(sum_sq);
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>(raw[i] / norm);
  return EmbeddingVector(std::move(out));
}

EmbeddingVector normalize(std::span<const float> raw) {
  return normalize_impl(raw);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dims() != b.dims()) {
    throw DimensionError(fmt::format("dimension mismatch: {} vs {}", a.dims(), b.dims()));
  }
  const auto av = a.values();
  const auto bv = b.values();
  // Dividing by the stored norms (rather than assuming exactly 1) makes
  // cosine(v, v) == 1 despite float rounding of the components.
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += static_cast<double>(av[i]) * bv[i];
    aa += static_cast<double>(av[i]) * av[i];
    bb += static_cast<double>(bv[i]) * bv[i];
  }
  return std::clamp(dot / std::sqrt(aa * bb), -1.0, 1.0);
}

std::string PerceptualHash::to_hex() const {
  return fmt::format("{:016x}", bits);
}

std::optional<PerceptualHash> PerceptualHash::from_hex(std::string_view hex) {
  if (hex.size() != 16) return std::nullopt;
  std::uint64_t value = 0;
  for (const char c : hex) {
    int digit;
    if (c >= '0' && c <= '9')
      digit = c - '0';
    else if (c >= 'a' && c <= 'f')
      digit = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      digit = c - 'A' + 10;
    else
      return std::nullopt;
    value = (value << 4) | static_cast<std::uint64_t>(digit);
  }
  return PerceptualHash{value};
}

int hamming(PerceptualHash a, PerceptualHash b) {
  return std::popcount(a.bits ^ b.bits);
}

void ReferenceSet::validate() const {
  if (embeddings.empty()) throw EmptyReferenceError("reference set is empty");
  const std::size_t d = embeddings.front().dims();
  for (const auto& e : embeddings) {
    if (e.dims() != d) {
      throw DimensionError(fmt::format("reference dims not uniform: {} vs {}", e.dims(), d));
    }
  }
}

bool is_valid_record_id(std::string_view id) {
  if (id.empty() || id.size() > 200 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
           c == '_' || c == '.';
  });
}

}  // namespace curator
