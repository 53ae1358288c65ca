#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "curator/core/region.hpp"

namespace curator::qa {

enum class CaptionFit { yes, no, unsure };

std::string_view to_string(CaptionFit fit);
std::optional<CaptionFit> parse_caption_fit(std::string_view text);

// One validator's judgment of one submitted image. `relevance` is the
// cultural relevance score, 5 = unique to the region ... 1 = unrelated.
struct ValidationVote {
  std::string validator_id;
  std::string image_id;
  bool photo_quality_ok = false;
  int relevance = 1;
  CaptionFit caption_fits = CaptionFit::unsure;
  bool pii_flag = false;

  friend bool operator==(const ValidationVote&, const ValidationVote&) = default;
};

// The validation form numbers its options from 1 (unique) to 5 (unrelated);
// the score runs the other way.
int relevance_score_from_option(int option);

// Throws PreconditionError for empty ids or relevance outside 1..5.
void validate_vote(const ValidationVote& vote);

enum class Tri { False, None, True };

std::string_view to_string(Tri value);

struct VerdictAverages {
  double photo_quality = 0.0;
  double relevance = 0.0;
  std::optional<double> caption_fit;  // empty when every caption vote was unsure
};

struct QAVerdict {
  std::string image_id;
  Tri quality = Tri::None;
  Tri caption = Tri::None;
  Tri relevance = Tri::None;
  Tri overall = Tri::None;
  std::size_t n_validators = 0;
  VerdictAverages averages;
  bool pii_flagged = false;
};

inline constexpr double kQualityPass = 0.5;    // pass iff average > 0.5
inline constexpr double kCaptionPass = 0.5;    // pass iff average > 0.5
inline constexpr double kRelevancePass = 3.0;  // pass iff average >= 3
inline constexpr std::size_t kMinValidators = 2;

// Photo quality and caption fit count 1 for ok/yes and 0 for not-ok/no;
// unsure captions are left out of the caption average.
VerdictAverages compute_averages(std::span<const ValidationVote> votes);

// The flag rules on precomputed averages: a metric that misses its threshold
// is False, one that passes is True with at least two validators and None
// otherwise. An undefined caption average is None. Overall is False when any
// metric is False, True when all are True, None otherwise.
QAVerdict decide_verdict(std::string image_id, const VerdictAverages& averages,
                         std::size_t n_validators);

// Votes of a single image. Throws NoVotesError, PreconditionError (mixed
// image ids, duplicate validators, invalid votes).
QAVerdict aggregate_verdict(std::span<const ValidationVote> votes);

// Verdict per image, ordered by image id.
std::vector<QAVerdict> aggregate_all(std::span<const ValidationVote> votes);

// Agreement of two votes over quality, binarized relevance (>= 3) and caption.
double vote_agreement(const ValidationVote& a, const ValidationVote& b);

// True when the two votes agree on fewer than 80% of the fields. Throws
// PreconditionError unless exactly two votes are given.
bool needs_escalation(std::span<const ValidationVote> votes);

// Image ids with exactly two votes that need a third validator, sorted.
std::vector<std::string> escalation_queue(std::span<const ValidationVote> votes);

// Image ids flagged for PII by any validator, sorted. Independent of verdicts.
std::vector<std::string> redaction_queue(std::span<const ValidationVote> votes);

nlohmann::json vote_to_json(const ValidationVote& vote);
ValidationVote vote_from_json(const nlohmann::json& json);  // throws ParseError

// Reads newline-delimited votes. Throws ParseError and DuplicateRatingError
// when a validator votes twice on one image.
std::vector<ValidationVote> read_votes(const std::filesystem::path& path);
void write_votes(const std::filesystem::path& path, std::span<const ValidationVote> votes);

std::string verdicts_csv(std::span<const QAVerdict> verdicts);
std::string render_verdicts(std::span<const QAVerdict> verdicts);

// ---- contribution points ---------------------------------------------------

// Points per submitted image by country. Throws UnknownCountryError for codes
// outside the eleven-country set.
int image_points(Region region);
int image_points(std::string_view country_code);
// Multi-region images score at their highest-point region.
int image_points(const RegionSet& regions);

inline constexpr int kValidationPoints = 1;
inline constexpr long long kCoAuthorThreshold = 200;

enum class ActivityKind { image_submission, validation, assigned };

std::string_view to_string(ActivityKind kind);
std::optional<ActivityKind> parse_activity_kind(std::string_view text);

struct Activity {
  ActivityKind kind = ActivityKind::validation;
  RegionSet regions;     // image_submission
  long long count = 1;   // repetitions (images or validations)
  long long points = 0;  // assigned
};

struct ContributorPoints {
  long long image_points = 0;
  long long validation_points = 0;
  long long assigned_points = 0;

  long long total() const { return image_points + validation_points + assigned_points; }
  friend bool operator==(const ContributorPoints&, const ContributorPoints&) = default;
};

struct ContributionLedger {
  std::map<std::string, ContributorPoints> contributors;
  long long co_author_threshold = kCoAuthorThreshold;

  friend bool operator==(const ContributionLedger&, const ContributionLedger&) = default;
};

// Points an activity is worth. Throws PreconditionError for negative counts
// or points, and for a submission without regions.
long long activity_points(const Activity& activity);

// Returns the ledger with the activity credited to `contributor`.
ContributionLedger award(ContributionLedger ledger, std::string_view contributor,
                         const Activity& activity);
void award_in_place(ContributionLedger& ledger, std::string_view contributor,
                    const Activity& activity);

struct RankedContributor {
  std::string id;
  long long total = 0;
};

struct Authorship {
  std::vector<RankedContributor> authors;       // total >= threshold
  std::vector<RankedContributor> acknowledged;  // below the threshold
};

// Both lists ordered by total descending, then id ascending.
Authorship authorship_order(const ContributionLedger& ledger);

struct LedgerEvent {
  std::string contributor;
  Activity activity;
};

nlohmann::json event_to_json(const LedgerEvent& event);
// Throws ParseError, or UnknownCountryError for a region outside the set.
LedgerEvent event_from_json(const nlohmann::json& json);

// The ledger file is an append-only event log, one JSON event per line.
std::vector<LedgerEvent> read_ledger_events(const std::filesystem::path& path);
void append_ledger_event(const std::filesystem::path& path, const LedgerEvent& event);
ContributionLedger replay(std::span<const LedgerEvent> events,
                          long long co_author_threshold = kCoAuthorThreshold);

std::string ledger_csv(const ContributionLedger& ledger);
std::string render_authorship(const Authorship& authorship);

}  // namespace curator::qa
