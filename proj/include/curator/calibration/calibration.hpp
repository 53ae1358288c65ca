#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curator/calibration/ratings.hpp"
#include "curator/core/types.hpp"
#include "curator/dedup/dedup.hpp"
#include "curator/filter/filter.hpp"

namespace curator::calibration {

// ---- stratified sampling ---------------------------------------------------

struct SampleItem {
  std::string id;
  BucketLabel bucket = BucketLabel::Bronze;
  double score = 0.0;
  std::optional<std::filesystem::path> local_path;
};

struct BucketSample {
  BucketLabel bucket = BucketLabel::Bronze;
  std::size_t population = 0;
  std::vector<SampleItem> items;  // draw order
  bool short_sampled = false;     // population < n_per_bucket
};

struct Sample {
  std::uint64_t seed = 0;
  std::size_t n_per_bucket = 0;
  std::vector<BucketSample> buckets;  // Bronze..Diamond

  const SampleItem* find(std::string_view id) const;
  std::size_t size() const;
};

// Uniform draw without replacement of up to n_per_bucket items from every
// scoring bucket. Candidates are ordered by id before drawing, so the sample
// depends only on the stored entries and the seed.
Sample stratified_sample(const filter::ScoredCorpus& scored, std::size_t n_per_bucket = 50,
                         std::uint64_t seed = 0);

// ---- bucket relevance and threshold ----------------------------------------

struct BucketRelevanceStat {
  SimilarityBucket bucket;
  std::size_t n_items = 0;          // sampled items with at least one rating
  std::size_t n_relevant = 0;       // strictly more yes than no
  double relevance_pct = 0.0;       // 100 * n_relevant / n_items
  std::optional<double> agreement;  // pairwise, over multi-rated items
};

struct RelevanceReport {
  std::vector<BucketRelevanceStat> stats;    // buckets with at least one rated item
  std::vector<std::string> unrated;          // sampled items without ratings
  std::vector<std::string> low_information;  // rated, but only not_sure votes
};

// Item is relevant when its yes votes strictly outnumber its no votes.
// Only bucket_relevance ratings for sampled items are considered.
RelevanceReport bucket_relevance(std::span<const RatingRecord> ratings, const Sample& sample);

struct ThresholdRecommendation {
  double boundary = 0.0;  // centi-score
  double rho = 0.0;       // boundary / 100
  BucketLabel bucket = BucketLabel::Diamond;
  bool target_met = false;
  std::string warning;
};

// Lowest bucket boundary at and above which every bucket reaches the target.
// When even the top bucket misses it, falls back to the Diamond boundary with
// a warning. Throws NoDataError (no stats) or PreconditionError (gaps or a
// Dropped entry).
ThresholdRecommendation recommend_threshold(std::span<const BucketRelevanceStat> stats,
                                            double target_relevance_pct);

// ---- agreement -------------------------------------------------------------

// item id -> labels given by its raters
using LabelGroups = std::map<std::string, std::vector<std::string>>;

LabelGroups group_labels(std::span<const RatingRecord> ratings, TaskKind task);

// Agreeing rater pairs over all rater pairs, for one item. Needs >= 2 labels.
double item_agreement(std::span<const std::string> labels);

// Mean item_agreement over items with at least two labels. Throws NoDataError
// when there are none.
double percent_agreement(const LabelGroups& groups);

// (P_o - P_e) / (1 - P_e), with P_o the percent agreement and P_e the sum of
// squared marginal label frequencies over the multi-rated items. Defined as
// 1 when P_e = 1. Throws NoDataError.
double chance_corrected_agreement(const LabelGroups& groups);

// Escalation predicate: agreement below the threshold calls for one more rater.
inline constexpr double kEscalationThreshold = 0.8;
bool needs_additional_rater(double agreement, double threshold = kEscalationThreshold);

// ---- dedup precision -------------------------------------------------------

// Item id under which a pair is rated; ':' cannot occur in record ids.
std::string pair_item_id(std::string_view id_a, std::string_view id_b);

struct PairSample {
  dedup::Method method = dedup::Method::phash;
  std::vector<dedup::ScoredPair> pairs;
  std::size_t available = 0;
  bool short_sampled = false;
};

// The n most confident predicted duplicates: highest cosine for embeddings,
// lowest Hamming distance for phash; ties by (id_a, id_b).
PairSample sample_top_pairs(std::span<const dedup::ScoredPair> pairs, dedup::Method method,
                            std::size_t n = 50);

struct PrecisionResult {
  std::size_t n_pairs = 0;
  std::size_t rated = 0;            // pairs with at least one dedup_pair rating
  std::size_t true_duplicates = 0;  // strict majority of raters said duplicate
  double precision = 0.0;           // true_duplicates / n_pairs
};

PrecisionResult pair_precision(const PairSample& sample, std::span<const RatingRecord> ratings);

// "label,precision" with an optional reference column, percentages to 2 d.p.
std::string render_precision_row(std::string_view label, const PrecisionResult& result,
                                 std::optional<double> reference_pct = std::nullopt);

// ---- Likert ----------------------------------------------------------------

enum class LikertSubject { generation, caption };

// Rubric rows for scores 3, 2, 1 in that order.
const std::array<std::string_view, 3>& likert_rubric(TaskKind task, LikertSubject subject);

// Guideline wording for relevance options 1..5.
const std::array<std::string_view, 5>& relevance_guideline();

struct LikertSummary {
  TaskKind task = TaskKind::likert_correctness;
  std::size_t n = 0;
  double mean = 0.0;
};

// Arithmetic mean of the task's scores (optionally restricted to `items`).
// Throws NoDataError when there are none, PreconditionError for other tasks.
LikertSummary likert_summary(std::span<const RatingRecord> ratings, TaskKind task,
                             const std::vector<std::string>* items = nullptr);

// One table row: "label,correctness,naturalness" with two decimals.
std::string render_likert_row(std::string_view label, const LikertSummary& correctness,
                              const LikertSummary& naturalness);

// ---- reports ---------------------------------------------------------------

std::string relevance_csv(const RelevanceReport& report);
std::string render_relevance(const RelevanceReport& report,
                             const std::optional<ThresholdRecommendation>& recommendation);

}  // namespace curator::calibration
