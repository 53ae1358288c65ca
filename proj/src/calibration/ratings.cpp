#include "curator/calibration/ratings.hpp"

#include <fmt/format.h>

#include "curator/core/errors.hpp"
#include "curator/core/io.hpp"

namespace curator::calibration {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::bucket_relevance: return "bucket_relevance";
    case TaskKind::dedup_pair: return "dedup_pair";
    case TaskKind::likert_correctness: return "likert_correctness";
    case TaskKind::likert_naturalness: return "likert_naturalness";
  }
  return "unknown";
}

std::optional<TaskKind> parse_task_kind(std::string_view text) {
  for (const TaskKind task : kAllTaskKinds) {
    if (to_string(task) == text) return task;
  }
  return std::nullopt;
}

std::string_view to_string(Relevance value) {
  switch (value) {
    case Relevance::yes: return "yes";
    case Relevance::no: return "no";
    case Relevance::not_sure: return "not_sure";
  }
  return "unknown";
}

std::optional<Relevance> parse_relevance(std::string_view text) {
  if (text == "yes") return Relevance::yes;
  if (text == "no") return Relevance::no;
  if (text == "not_sure") return Relevance::not_sure;
  return std::nullopt;
}

std::optional<Relevance> relevance_from_guideline_option(int option) {
  if (option == 1 || option == 2) return Relevance::yes;
  if (option == 3) return Relevance::not_sure;
  if (option == 4 || option == 5) return Relevance::no;
  return std::nullopt;
}

bool value_matches_task(TaskKind task, const RatingValue& value) {
  switch (task) {
    case TaskKind::bucket_relevance: return std::holds_alternative<Relevance>(value);
    case TaskKind::dedup_pair: return std::holds_alternative<bool>(value);
    case TaskKind::likert_correctness:
    case TaskKind::likert_naturalness: {
      const int* score = std::get_if<int>(&value);
      return score && *score >= 1 && *score <= 3;
    }
  }
  return false;
}

void validate_rating(const RatingRecord& rating) {
  if (rating.rater_id.empty()) throw PreconditionError("rating has an empty rater_id");
  if (rating.item_id.empty()) throw PreconditionError("rating has an empty item_id");
  if (!value_matches_task(rating.task, rating.value)) {
    throw PreconditionError(fmt::format("value {} is outside the domain of task {}",
                                        value_label(rating.value), to_string(rating.task)));
  }
}

std::string value_label(const RatingValue& value) {
  if (const auto* r = std::get_if<Relevance>(&value)) return std::string(to_string(*r));
  if (const auto* b = std::get_if<bool>(&value)) return *b ? "true" : "false";
  return std::to_string(std::get<int>(value));
}

json rating_to_json(const RatingRecord& rating) {
  json out;
  out["rater_id"] = rating.rater_id;
  out["item_id"] = rating.item_id;
  out["task"] = to_string(rating.task);
  if (const auto* r = std::get_if<Relevance>(&rating.value)) {
    out["value"] = to_string(*r);
  } else if (const auto* b = std::get_if<bool>(&rating.value)) {
    out["value"] = *b;
  } else {
    out["value"] = std::get<int>(rating.value);
  }
  out["timestamp"] = rating.timestamp;
  return out;
}

RatingRecord rating_from_json(const json& in) {
  if (!in.is_object()) throw ParseError("rating is not an object");
  auto string_field = [&](const char* key) {
    const auto it = in.find(key);
    if (it == in.end() || !it->is_string()) {
      throw ParseError(fmt::format("rating field '{}' must be a string", key));
    }
    return it->get<std::string>();
  };
  RatingRecord rating;
  rating.rater_id = string_field("rater_id");
  rating.item_id = string_field("item_id");
  const auto task = parse_task_kind(string_field("task"));
  if (!task) throw ParseError("unknown rating task");
  rating.task = *task;

  const auto value = in.find("value");
  if (value == in.end()) throw ParseError("rating has no value");
  switch (rating.task) {
    case TaskKind::bucket_relevance: {
      std::optional<Relevance> parsed;
      if (value->is_string()) parsed = parse_relevance(value->get<std::string>());
      if (value->is_number_integer()) parsed = relevance_from_guideline_option(value->get<int>());
      if (!parsed) throw ParseError("relevance must be yes, no, not_sure or an option 1-5");
      rating.value = *parsed;
      break;
    }
    case TaskKind::dedup_pair:
      if (!value->is_boolean()) throw ParseError("dedup_pair value must be a boolean");
      rating.value = value->get<bool>();
      break;
    case TaskKind::likert_correctness:
    case TaskKind::likert_naturalness:
      if (!value->is_number_integer()) throw ParseError("Likert value must be an integer");
      rating.value = value->get<int>();
      break;
  }
  if (const auto ts = in.find("timestamp"); ts != in.end() && !ts->is_null()) {
    if (!ts->is_number_integer()) throw ParseError("timestamp must be an integer");
    rating.timestamp = ts->get<std::int64_t>();
  }
  try {
    validate_rating(rating);
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
  return rating;
}

std::vector<RatingRecord> read_ratings(const fs::path& path) {
  std::vector<RatingRecord> out;
  for_each_line(path, [&](std::size_t number, std::string_view line) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    try {
      out.push_back(rating_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), number, e.what()));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), number, e.what()));
    }
  });
  return out;
}

RatingLog::RatingLog(fs::path path) : path_(std::move(path)) {
  if (fs::exists(*path_)) {
    for (auto& rating : read_ratings(*path_)) {
      Key key{rating.rater_id, rating.item_id, rating.task};
      if (!keys_.insert(std::move(key)).second) {
        throw DuplicateRatingError(fmt::format("{} holds a duplicate rating by {} for {}",
                                               path_->string(), rating.rater_id, rating.item_id));
      }
      records_.push_back(std::move(rating));
    }
  } else if (path_->has_parent_path()) {
    fs::create_directories(path_->parent_path());
  }
  out_.open(*path_, std::ios::app | std::ios::binary);
  if (!out_) throw IoError(fmt::format("cannot open {} for appending", path_->string()));
}

void RatingLog::append(RatingRecord rating) {
  validate_rating(rating);
  const std::string line = rating_to_json(rating).dump() + "\n";
  std::lock_guard lock(mutex_);
  Key key{rating.rater_id, rating.item_id, rating.task};
  if (keys_.contains(key)) {
    throw DuplicateRatingError(fmt::format("{} already rated {} for {}", rating.rater_id,
                                           rating.item_id, to_string(rating.task)));
  }
  if (path_) {
    out_ << line;
    out_.flush();
    if (!out_) throw IoError(fmt::format("failed to append to {}", path_->string()));
  }
  keys_.insert(std::move(key));
  records_.push_back(std::move(rating));
}

bool RatingLog::contains(std::string_view rater_id, std::string_view item_id, TaskKind task) const {
  std::lock_guard lock(mutex_);
  return keys_.contains(Key{std::string(rater_id), std::string(item_id), task});
}

std::vector<RatingRecord> RatingLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t RatingLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

}  // namespace curator::calibration
