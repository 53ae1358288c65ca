#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "curator/core/types.hpp"
#include "curator/embed/provider.hpp"

namespace curator::filter {

struct FilterConfig {
  double rho = 0.545;              // retention threshold on the mean similarity
  double prefilter_floor = 0.515;  // scores below this are counted, not stored
  ReferenceSet reference;

  // prefilter_floor <= rho <= 1, rho >= -1, reference valid.
  void validate() const;
};

struct ScoredEntry {
  ImageRecord record;  // carries similarity_score and bucket
  double score = 0.0;
  BucketLabel bucket = BucketLabel::Dropped;
};

struct UnscoredImage {
  std::string id;
  std::string reason;
};

struct ScoredCorpus {
  double rho = 0.0;
  double prefilter_floor = 0.0;
  std::vector<ScoredEntry> entries;  // score >= prefilter_floor, sorted by id
  std::size_t below_floor = 0;
  std::vector<UnscoredImage> unscored;  // provider or I/O failures, sorted by id

  // Images that produced a score, stored or not.
  std::size_t scored_count() const { return entries.size() + below_floor; }
  bool is_retained(const ScoredEntry& entry) const { return entry.score >= rho; }
  std::vector<std::string> retained_ids() const;
  Corpus retained_records() const;
};

// (1 / |ref|) * sum over z in ref of cosine(x, z). The per-reference terms are
// summed in sorted order, so the result does not depend on reference order.
double mean_reference_similarity(const EmbeddingVector& x, const ReferenceSet& reference);

// Scores already-embedded images. `embeddings[i]` belongs to `records[i]`;
// an empty optional marks an unscored image with the matching reason.
ScoredCorpus score_corpus(const Corpus& records,
                          const std::vector<std::optional<EmbeddingVector>>& embeddings,
                          const std::vector<std::string>& failure_reasons,
                          const FilterConfig& config);

// Reads each record's local_path, embeds it through `provider` and applies
// the retention rule score >= rho. Scoring fans out over `parallelism`
// workers; the output is independent of scheduling.
ScoredCorpus filter_corpus(const Corpus& corpus, embed::Provider& provider,
                           const FilterConfig& config, std::size_t parallelism = 1);

struct RetentionRow {
  BucketLabel bucket = BucketLabel::Dropped;
  std::size_t count = 0;
  double percent = 0.0;  // of total_count
};

struct RetentionTable {
  std::vector<RetentionRow> rows;  // Dropped, Bronze, ..., Diamond
  std::size_t total = 0;
};

// Per-bucket image count and share of `total_count`. Dropped absorbs every
// image not stored in a scoring bucket. Throws ArithmeticError when
// total_count is smaller than the stored count.
RetentionTable threshold_sweep(const ScoredCorpus& scored, std::size_t total_count);

// Same table from explicit counts for Bronze..Diamond.
RetentionTable retention_from_counts(const std::array<std::size_t, kBucketCount - 1>& counts,
                                     std::size_t total_count);

std::string retention_csv(const RetentionTable& table);
std::string render_retention(const RetentionTable& table);

// Reference matrix file: 8-byte magic "CURATREF", uint32 dims, uint32 count
// (all little-endian), then count x dims float32 rows.
void write_reference_file(const std::filesystem::path& path, const ReferenceSet& reference);
ReferenceSet read_reference_file(const std::filesystem::path& path);

// ScoredCorpus persistence: scored.jsonl (one record per stored entry) plus
// scored_meta.json with rho, floor, below_floor and the unscored list.
void write_scored_corpus(const std::filesystem::path& dir, const ScoredCorpus& scored);
ScoredCorpus read_scored_corpus(const std::filesystem::path& dir);

}  // namespace curator::filter
