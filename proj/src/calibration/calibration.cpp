#include "curator/calibration/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <fmt/format.h>

#include "curator/core/errors.hpp"
#include "curator/core/format.hpp"

namespace curator::calibration {

namespace {

// Uniform integer in [0, bound) by rejection, so the draw sequence is the same
// on every standard library (std::uniform_int_distribution is not portable).
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

std::size_t bucket_index(BucketLabel label) {
  return static_cast<std::size_t>(label);
}

struct VoteTally {
  std::size_t yes = 0;
  std::size_t no = 0;
  std::size_t not_sure = 0;
  std::vector<std::string> labels;
};

std::string percent_text(double pct) {
  return two_decimals(pct) + "%";
}

}  // namespace

const SampleItem* Sample::find(std::string_view id) const {
  for (const auto& bucket : buckets) {
    for (const auto& item : bucket.items) {
      if (item.id == id) return &item;
    }
  }
  return nullptr;
}

std::size_t Sample::size() const {
  std::size_t n = 0;
  for (const auto& bucket : buckets) n += bucket.items.size();
  return n;
}

Sample stratified_sample(const filter::ScoredCorpus& scored, std::size_t n_per_bucket,
                         std::uint64_t seed) {
  Sample sample;
  sample.seed = seed;
  sample.n_per_bucket = n_per_bucket;
  std::vector<std::vector<const filter::ScoredEntry*>> pools(kBucketCount);
  for (const auto& entry : scored.entries) pools[bucket_index(entry.bucket)].push_back(&entry);

  std::mt19937_64 rng(seed);
  for (std::size_t b = 1; b < kBucketCount; ++b) {
    auto& pool = pools[b];
    std::sort(pool.begin(), pool.end(),
              [](const auto* x, const auto* y) { return x->record.id < y->record.id; });
    BucketSample bucket;
    bucket.bucket = static_cast<BucketLabel>(b);
    bucket.population = pool.size();
    bucket.short_sampled = pool.size() < n_per_bucket;
    const std::size_t take = std::min(n_per_bucket, pool.size());
    // Partial Fisher-Yates: the first `take` slots become the sample.
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + uniform_below(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
      const auto& entry = *pool[i];
      bucket.items.push_back(
          SampleItem{entry.record.id, entry.bucket, entry.score, entry.record.local_path});
    }
    sample.buckets.push_back(std::move(bucket));
  }
  return sample;
}

RelevanceReport bucket_relevance(std::span<const RatingRecord> ratings, const Sample& sample) {
  std::map<std::string, VoteTally, std::less<>> tallies;
  for (const auto& rating : ratings) {
    if (rating.task != TaskKind::bucket_relevance) continue;
    const auto* value = std::get_if<Relevance>(&rating.value);
    if (!value) continue;
    auto& tally = tallies[rating.item_id];
    switch (*value) {
      case Relevance::yes: ++tally.yes; break;
      case Relevance::no: ++tally.no; break;
      case Relevance::not_sure: ++tally.not_sure; break;
    }
    tally.labels.emplace_back(to_string(*value));
  }

  RelevanceReport report;
  for (const auto& bucket : sample.buckets) {
    BucketRelevanceStat stat;
    stat.bucket = bucket_of(bucket.bucket);
    LabelGroups groups;
    for (const auto& item : bucket.items) {
      const auto it = tallies.find(item.id);
      if (it == tallies.end()) {
        report.unrated.push_back(item.id);
        continue;
      }
      const VoteTally& tally = it->second;
      ++stat.n_items;
      if (tally.yes > tally.no) ++stat.n_relevant;
      if (tally.yes == 0 && tally.no == 0) report.low_information.push_back(item.id);
      if (tally.labels.size() >= 2) groups.emplace(item.id, tally.labels);
    }
    if (stat.n_items == 0) continue;
    stat.relevance_pct =
        100.0 * static_cast<double>(stat.n_relevant) / static_cast<double>(stat.n_items);
    if (!groups.empty()) stat.agreement = percent_agreement(groups);
    report.stats.push_back(stat);
  }
  std::sort(report.unrated.begin(), report.unrated.end());
  std::sort(report.low_information.begin(), report.low_information.end());
  return report;
}

ThresholdRecommendation recommend_threshold(std::span<const BucketRelevanceStat> stats,
                                            double target_relevance_pct) {
  if (stats.empty()) throw NoDataError("no bucket statistics to recommend a threshold from");
  std::vector<const BucketRelevanceStat*> ordered;
  for (const auto& stat : stats) ordered.push_back(&stat);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->bucket.label < b->bucket.label; });
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (ordered[i]->bucket.label == BucketLabel::Dropped) {
      throw PreconditionError("the Dropped bucket cannot carry relevance statistics");
    }
    if (i > 0 &&
        bucket_index(ordered[i]->bucket.label) != bucket_index(ordered[i - 1]->bucket.label) + 1) {
      throw PreconditionError("bucket statistics must cover contiguous buckets");
    }
  }

  const BucketRelevanceStat* lowest_passing = nullptr;
  for (auto it = ordered.rbegin(); it != ordered.rend(); ++it) {
    if ((*it)->relevance_pct < target_relevance_pct) break;
    lowest_passing = *it;
  }

  ThresholdRecommendation out;
  if (lowest_passing) {
    out.bucket = lowest_passing->bucket.label;
    out.target_met = true;
  } else {
    out.bucket = BucketLabel::Diamond;
    out.warning = fmt::format("no bucket reaches {}% relevance; using the highest boundary",
                              two_decimals(target_relevance_pct));
  }
  out.boundary = bucket_of(out.bucket).lower;
  out.rho = out.boundary / 100.0;
  return out;
}

LabelGroups group_labels(std::span<const RatingRecord> ratings, TaskKind task) {
  LabelGroups groups;
  for (const auto& rating : ratings) {
    if (rating.task == task) groups[rating.item_id].push_back(value_label(rating.value));
  }
  return groups;
}

double item_agreement(std::span<const std::string> labels) {
  if (labels.size() < 2) throw PreconditionError("agreement needs at least two labels");
  std::map<std::string_view, std::size_t> counts;
  for (const auto& label : labels) ++counts[label];
  std::size_t agreeing = 0;
  for (const auto& [label, count] : counts) agreeing += count * (count - 1) / 2;
  const std::size_t total = labels.size() * (labels.size() - 1) / 2;
  return static_cast<double>(agreeing) / static_cast<double>(total);
}

double percent_agreement(const LabelGroups& groups) {
  double sum = 0.0;
  std::size_t items = 0;
  for (const auto& [item, labels] : groups) {
    if (labels.size() < 2) continue;
    sum += item_agreement(labels);
    ++items;
  }
  if (items == 0) throw NoDataError("no item has two or more ratings");
  return sum / static_cast<double>(items);
}

double chance_corrected_agreement(const LabelGroups& groups) {
  const double observed = percent_agreement(groups);
  std::map<std::string_view, std::size_t> marginals;
  std::size_t total = 0;
  for (const auto& [item, labels] : groups) {
    if (labels.size() < 2) continue;
    for (const auto& label : labels) ++marginals[label];
    total += labels.size();
  }
  double expected = 0.0;
  for (const auto& [label, count] : marginals) {
    const double p = static_cast<double>(count) / static_cast<double>(total);
    expected += p * p;
  }
  if (expected >= 1.0) return 1.0;
  return (observed - expected) / (1.0 - expected);
}

bool needs_additional_rater(double agreement, double threshold) {
  return agreement < threshold;
}

std::string pair_item_id(std::string_view id_a, std::string_view id_b) {
  return fmt::format("{}:{}", id_a, id_b);
}

PairSample sample_top_pairs(std::span<const dedup::ScoredPair> pairs, dedup::Method method,
                            std::size_t n) {
  PairSample out;
  out.method = method;
  out.available = pairs.size();
  out.short_sampled = pairs.size() < n;
  out.pairs.assign(pairs.begin(), pairs.end());
  const bool higher_is_better = method == dedup::Method::embedding;
  std::sort(out.pairs.begin(), out.pairs.end(),
            [&](const dedup::ScoredPair& a, const dedup::ScoredPair& b) {
              if (a.score != b.score)
                return higher_is_better ? a.score > b.score : a.score < b.score;
              if (a.id_a != b.id_a) return a.id_a < b.id_a;
              return a.id_b < b.id_b;
            });
  if (out.pairs.size() > n) out.pairs.resize(n);
  return out;
}

PrecisionResult pair_precision(const PairSample& sample, std::span<const RatingRecord> ratings) {
  std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> votes;  // yes, no
  for (const auto& rating : ratings) {
    if (rating.task != TaskKind::dedup_pair) continue;
    const auto* value = std::get_if<bool>(&rating.value);
    if (!value) continue;
    auto& [yes, no] = votes[rating.item_id];
    ++(*value ? yes : no);
  }
  PrecisionResult result;
  result.n_pairs = sample.pairs.size();
  for (const auto& pair : sample.pairs) {
    const auto it = votes.find(pair_item_id(pair.id_a, pair.id_b));
    if (it == votes.end()) continue;
    ++result.rated;
    if (it->second.first > it->second.second) ++result.true_duplicates;
  }
  if (result.n_pairs > 0) {
    result.precision =
        static_cast<double>(result.true_duplicates) / static_cast<double>(result.n_pairs);
  }
  return result;
}

std::string render_precision_row(std::string_view label, const PrecisionResult& result,
                                 std::optional<double> reference_pct) {
  std::string row = fmt::format("{},{}", label, percent_text(100.0 * result.precision));
  if (reference_pct) row += "," + percent_text(*reference_pct);
  return row;
}

const std::array<std::string_view, 3>& likert_rubric(TaskKind task, LikertSubject subject) {
  static const std::array<std::string_view, 3> kGenerationCorrectness = {
      "The image correctly describes the given query.",
      "The image somewhat correctly describes the given query.",
      "The image is irrelevant to the query.",
  };
  static const std::array<std::string_view, 3> kGenerationNaturalness = {
      "The image is natural and culturally relevant.",
      "The image feels somewhat natural.",
      "The image is unnatural and looks machine generated.",
  };
  static const std::array<std::string_view, 3> kCaptionCorrectness = {
      "The caption correctly describes the given image.",
      "The caption somewhat correctly describes the given image.",
      "The caption is irrelevant to the image.",
  };
  static const std::array<std::string_view, 3> kCaptionNaturalness = {
      "The caption seems to be naturally written by native speakers.",
      "The caption feels somewhat natural.",
      "The caption is unnatural and looks machine-generated.",
  };
  if (task == TaskKind::likert_correctness) {
    return subject == LikertSubject::generation ? kGenerationCorrectness : kCaptionCorrectness;
  }
  if (task == TaskKind::likert_naturalness) {
    return subject == LikertSubject::generation ? kGenerationNaturalness : kCaptionNaturalness;
  }
  throw PreconditionError(fmt::format("task {} has no Likert rubric", to_string(task)));
}

const std::array<std::string_view, 5>& relevance_guideline() {
  static const std::array<std::string_view, 5> kOptions = {
      "Yes. Unique to SEA.",
      "Yes, people will likely think of SEA when seeing the picture, but it may have a low "
      "degree of similarity to other cultures.",
      "Maybe. Not originally from SEA but very common in SEA culture.",
      "Not really. It has some affiliation to SEA, but actually does not represent SEA or has "
      "stronger affiliation to cultures outside SEA.",
      "No. Totally unrelated to SEA.",
  };
  return kOptions;
}

LikertSummary likert_summary(std::span<const RatingRecord> ratings, TaskKind task,
                             const std::vector<std::string>* items) {
  if (task != TaskKind::likert_correctness && task != TaskKind::likert_naturalness) {
    throw PreconditionError(fmt::format("task {} is not a Likert task", to_string(task)));
  }
  std::set<std::string_view> allowed;
  if (items) allowed.insert(items->begin(), items->end());
  LikertSummary summary;
  summary.task = task;
  long long sum = 0;
  for (const auto& rating : ratings) {
    if (rating.task != task) continue;
    if (items && !allowed.contains(rating.item_id)) continue;
    const int* score = std::get_if<int>(&rating.value);
    if (!score || *score < 1 || *score > 3) {
      throw PreconditionError(fmt::format("Likert score for {} outside 1..3", rating.item_id));
    }
    sum += *score;
    ++summary.n;
  }
  if (summary.n == 0) throw NoDataError(fmt::format("no {} ratings", to_string(task)));
  summary.mean = static_cast<double>(sum) / static_cast<double>(summary.n);
  return summary;
}

std::string render_likert_row(std::string_view label, const LikertSummary& correctness,
                              const LikertSummary& naturalness) {
  return fmt::format("{},{},{}", label, two_decimals(correctness.mean),
                     two_decimals(naturalness.mean));
}

std::string relevance_csv(const RelevanceReport& report) {
  std::string out = "bucket,lower,upper,n_items,n_relevant,relevance_pct,agreement\n";
  for (const auto& stat : report.stats) {
    const std::string upper =
        std::isinf(stat.bucket.upper) ? std::string() : fmt::format("{}", stat.bucket.upper);
    out += fmt::format("{},{},{},{},{},{},{}\n", to_string(stat.bucket.label), stat.bucket.lower,
                       upper, stat.n_items, stat.n_relevant, two_decimals(stat.relevance_pct),
                       stat.agreement ? fmt::format("{:.4f}", *stat.agreement) : std::string());
  }
  return out;
}

std::string render_relevance(const RelevanceReport& report,
                             const std::optional<ThresholdRecommendation>& recommendation) {
  std::string out = fmt::format("{:<10} {:>14} {:>7} {:>10} {:>10}\n", "bucket", "range", "items",
                                "relevant", "agreement");
  for (const auto& stat : report.stats) {
    const std::string range = std::isinf(stat.bucket.upper)
                                  ? fmt::format(">={}", stat.bucket.lower)
                                  : fmt::format("[{},{})", stat.bucket.lower, stat.bucket.upper);
    out += fmt::format("{:<10} {:>14} {:>7} {:>10} {:>10}\n", to_string(stat.bucket.label), range,
                       stat.n_items, percent_text(stat.relevance_pct),
                       stat.agreement ? fmt::format("{:.4f}", *stat.agreement) : "-");
  }
  if (!report.unrated.empty()) out += fmt::format("unrated items: {}\n", report.unrated.size());
  if (!report.low_information.empty()) {
    out += fmt::format("low-information items: {}\n", report.low_information.size());
  }
  if (recommendation) {
    out += fmt::format("recommended threshold: {} (rho = {})\n", recommendation->boundary,
                       recommendation->rho);
    if (!recommendation->warning.empty()) out += "warning: " + recommendation->warning + "\n";
  }
  return out;
}

}  // namespace curator::calibration
