#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include <json.hpp>

namespace curator::calibration {

enum class TaskKind { bucket_relevance, dedup_pair, likert_correctness, likert_naturalness };
inline constexpr TaskKind kAllTaskKinds[] = {TaskKind::bucket_relevance, TaskKind::dedup_pair,
                                             TaskKind::likert_correctness,
                                             TaskKind::likert_naturalness};

std::string_view to_string(TaskKind task);
std::optional<TaskKind> parse_task_kind(std::string_view text);

enum class Relevance { yes, no, not_sure };

std::string_view to_string(Relevance value);
std::optional<Relevance> parse_relevance(std::string_view text);

// Collapses the five-option cultural relevance guideline onto the three-way
// scale: options 1-2 -> yes, 3 -> not_sure, 4-5 -> no.
std::optional<Relevance> relevance_from_guideline_option(int option);

// Relevance for bucket_relevance, bool for dedup_pair, 1..3 for Likert tasks.
using RatingValue = std::variant<Relevance, bool, int>;

struct RatingRecord {
  std::string rater_id;
  std::string item_id;
  TaskKind task = TaskKind::bucket_relevance;
  RatingValue value;
  std::int64_t timestamp = 0;  // unix milliseconds

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

bool value_matches_task(TaskKind task, const RatingValue& value);
// Throws PreconditionError for empty ids or a value outside the task's domain.
void validate_rating(const RatingRecord& rating);

// Stable text label of a value ("yes", "true", "2", ...), used for agreement.
std::string value_label(const RatingValue& value);

nlohmann::json rating_to_json(const RatingRecord& rating);
// Accepts the value as its native JSON type or, for bucket_relevance, a
// guideline option 1..5. Throws ParseError.
RatingRecord rating_from_json(const nlohmann::json& json);

// Append-only rating store. Every accepted record is validated, checked for
// (rater_id, item_id, task) uniqueness and, when backed by a file, appended
// as one JSON line before append() returns. Safe for concurrent use.
class RatingLog {
 public:
  RatingLog() = default;
  // Loads existing records from `path` (if present) and appends to it.
  explicit RatingLog(std::filesystem::path path);

  RatingLog(const RatingLog&) = delete;
  RatingLog& operator=(const RatingLog&) = delete;

  // Throws DuplicateRatingError or PreconditionError.
  void append(RatingRecord rating);
  bool contains(std::string_view rater_id, std::string_view item_id, TaskKind task) const;
  std::vector<RatingRecord> snapshot() const;
  std::size_t size() const;

 private:
  using Key = std::tuple<std::string, std::string, TaskKind>;

  mutable std::mutex mutex_;
  std::vector<RatingRecord> records_;
  std::set<Key, std::less<>> keys_;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
};

// Reads a newline-delimited rating file. Throws ParseError, IoError.
std::vector<RatingRecord> read_ratings(const std::filesystem::path& path);

}  // namespace curator::calibration
