#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curator/core/region.hpp"

namespace curator {

enum class Source : std::uint8_t { crawled, crowdsourced };

std::string_view to_string(Source source);
std::optional<Source> parse_source(std::string_view text);

// Similarity bucket labels in ascending order of score.
enum class BucketLabel : std::uint8_t { Dropped, Bronze, Silver, Gold, Platinum, Diamond };

inline constexpr std::size_t kBucketCount = 6;

std::string_view to_string(BucketLabel label);
std::optional<BucketLabel> parse_bucket_label(std::string_view text);

// A half-open interval [lower, upper) on the centi-score scale (score x 100).
// Dropped is unbounded below and Diamond unbounded above.
struct SimilarityBucket {
  BucketLabel label = BucketLabel::Dropped;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double centi_score) const { return centi_score >= lower && centi_score < upper; }
  friend bool operator==(const SimilarityBucket&, const SimilarityBucket&) = default;
};

// The six buckets partitioning the centi-score line, ordered by `lower`.
const std::vector<SimilarityBucket>& similarity_buckets();
const SimilarityBucket& bucket_of(BucketLabel label);

// Converts a similarity score in [-1, 1] to the centi-score scale. The product
// is rounded to nine decimals so that decimal literals such as 0.545 land on
// their printed boundary instead of a binary neighbour.
double to_centi_score(double score);

// Total mapping from a similarity score to its bucket.
const SimilarityBucket& assign_bucket(double score);

// Unit-norm real vector. Instances can only be produced through normalize()
// or from_unit(), so every live EmbeddingVector satisfies the norm invariant.
class EmbeddingVector {
 public:
  static constexpr double kNormTolerance = 1e-6;

  EmbeddingVector() = default;

  // Validates that `values` already has unit norm and finite entries.
  static EmbeddingVector from_unit(std::vector<float> values);

  std::size_t dims() const { return values_.size(); }
  std::span<const float> values() const { return values_; }
  bool empty() const { return values_.empty(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {}
  friend EmbeddingVector normalize(std::span<const double> raw);

  std::vector<float> values_;
};

// Scales a non-zero finite vector to unit Euclidean norm.
EmbeddingVector normalize(std::span<const double> raw);
EmbeddingVector normalize(std::span<const float> raw);

// Dot product of two unit vectors, clamped to [-1, 1].
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct PerceptualHash {
  std::uint64_t bits = 0;

  std::string to_hex() const;
  static std::optional<PerceptualHash> from_hex(std::string_view hex);

  friend bool operator==(const PerceptualHash&, const PerceptualHash&) = default;
  friend auto operator<=>(const PerceptualHash&, const PerceptualHash&) = default;
};

int hamming(PerceptualHash a, PerceptualHash b);

struct ReferenceSet {
  std::vector<EmbeddingVector> embeddings;
  std::string provenance;

  std::size_t dims() const { return embeddings.empty() ? 0 : embeddings.front().dims(); }
  // Throws EmptyReferenceError or DimensionError when the invariants fail.
  void validate() const;
};

struct ImageRecord {
  std::string id;
  Source source = Source::crawled;
  std::optional<std::string> url;
  std::optional<std::filesystem::path> local_path;
  std::optional<std::string> caption_en;
  std::optional<std::string> caption_native;
  std::optional<std::string> native_language;
  RegionSet regions;
  std::optional<double> similarity_score;
  std::optional<BucketLabel> bucket;
  std::optional<std::string> cluster_id;
  bool pii_cleared = false;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

using Corpus = std::vector<ImageRecord>;

// True when `id` is safe to use as a file name component.
bool is_valid_record_id(std::string_view id);

}  // namespace curator
