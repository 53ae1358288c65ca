#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curator/core/io.hpp"
#include "curator/core/types.hpp"
#include "curator/embed/provider.hpp"

namespace curator::dedup {

enum class Method { phash, embedding };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view text);

struct DedupConfig {
  Method method = Method::phash;
  double epsilon = 0.95;  // embedding: duplicate iff cosine >= epsilon
  int max_hamming = 16;   // phash: duplicate iff hamming <= max_hamming

  void validate() const;
};

// Per-record features. Only the artifact for the configured method is needed.
struct DedupItem {
  std::string id;
  Source source = Source::crawled;
  std::optional<PerceptualHash> hash;
  std::optional<EmbeddingVector> embedding;
};

// g(x, y). Throws MissingFeatureError when either side lacks the feature.
bool is_duplicate(const DedupItem& a, const DedupItem& b, const DedupConfig& config);

struct DuplicateCluster {
  std::string cluster_id;
  std::vector<std::string> member_ids;  // sorted
  std::string canonical_id;

  friend bool operator==(const DuplicateCluster&, const DuplicateCluster&) = default;
};

enum class ScanStrategy {
  automatic,   // exhaustive below ScanOptions::exhaustive_limit, blocked above
  exhaustive,  // every pair; always exact
  blocked,     // candidate pairs from hash segments (exact for phash) or
               // random-hyperplane bands (approximate for embeddings)
};

struct ScanOptions {
  ScanStrategy strategy = ScanStrategy::automatic;
  std::size_t workers = 1;
  std::size_t exhaustive_limit = 100000;
};

struct DedupResult {
  std::vector<DuplicateCluster> clusters;  // ordered by canonical id
  std::vector<std::string> flagged;        // ids without features (kept as singletons)
};

// Connected components of the duplicate graph. Canonical member: a
// crowdsourced record when the cluster has one, then the smallest id. The
// output is a pure function of the item set.
DedupResult dedup_corpus(std::span<const DedupItem> items, const DedupConfig& config,
                         const ScanOptions& options = {});

// Canonical ids, one per cluster, in cluster order.
std::vector<std::string> survivors(const std::vector<DuplicateCluster>& clusters);
// Canonical records with cluster_id filled in.
Corpus survivors(const std::vector<DuplicateCluster>& clusters, const Corpus& corpus);

// Computes the method's feature for every record with a readable local image.
// Failures leave the feature empty; `errors` (if given) receives id: reason.
std::vector<DedupItem> extract_features(const Corpus& corpus, const DedupConfig& config,
                                        embed::Provider* provider, std::size_t workers = 1,
                                        std::vector<std::string>* errors = nullptr);

struct ScoredPair {
  std::string id_a;  // id_a < id_b
  std::string id_b;
  double score = 0.0;  // cosine for embeddings, Hamming distance for phash
};

// Every predicted-duplicate pair with its score (exhaustive scan).
std::vector<ScoredPair> duplicate_pairs(std::span<const DedupItem> items,
                                        const DedupConfig& config);

struct ThroughputSample {
  Method method = Method::phash;
  std::size_t images_processed = 0;
  double elapsed_seconds = 0.0;
  double images_per_second = 0.0;
};

// Wall-clock of feature extraction plus the exhaustive pairwise scan, once per
// repetition. The embedding method needs a provider. Throws EmptyInputError.
std::vector<ThroughputSample> measure_throughput(const DedupConfig& config,
                                                 std::span<const Bytes> images,
                                                 std::size_t repetitions,
                                                 embed::Provider* provider = nullptr);

std::string cluster_report_csv(const std::vector<DuplicateCluster>& clusters);
// Inverse of cluster_report_csv. Throws ParseError.
std::vector<DuplicateCluster> parse_cluster_report_csv(std::string_view csv);
std::string render_throughput(const std::vector<ThroughputSample>& samples);

// Hash sidecar: one "id,hex16" line per item that has a hash.
void write_hash_sidecar(const std::filesystem::path& path, std::span<const DedupItem> items);
std::vector<std::pair<std::string, PerceptualHash>> read_hash_sidecar(
    const std::filesystem::path& path);

}  // namespace curator::dedup
