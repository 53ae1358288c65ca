#include "curator/qa/qa.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "curator/core/errors.hpp"
#include "curator/core/io.hpp"

namespace curator::qa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Tri metric_flag(bool passes, std::size_t n_validators) {
  if (!passes) return Tri::False;
  return n_validators >= kMinValidators ? Tri::True : Tri::None;
}

std::string average_text(std::optional<double> value) {
  return value ? fmt::format("{:.4f}", *value) : std::string();
}

template <typename Fn>
void for_each_json_line(const fs::path& path, Fn&& fn) {
  for_each_line(path, [&](std::size_t number, std::string_view line) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), number, e.what()));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), number, e.what()));
    }
  });
}

const json& require(const json& in, const char* key) {
  const auto it = in.find(key);
  if (it == in.end()) throw ParseError(fmt::format("missing field '{}'", key));
  return *it;
}

std::vector<RankedContributor> ranked(std::vector<RankedContributor> list) {
  std::sort(list.begin(), list.end(), [](const RankedContributor& a, const RankedContributor& b) {
    if (a.total != b.total) return a.total > b.total;
    return a.id < b.id;
  });
  return list;
}

}  // namespace

std::string_view to_string(CaptionFit fit) {
  switch (fit) {
    case CaptionFit::yes: return "yes";
    case CaptionFit::no: return "no";
    case CaptionFit::unsure: return "unsure";
  }
  return "unknown";
}

std::optional<CaptionFit> parse_caption_fit(std::string_view text) {
  if (text == "yes") return CaptionFit::yes;
  if (text == "no") return CaptionFit::no;
  if (text == "unsure") return CaptionFit::unsure;
  return std::nullopt;
}

int relevance_score_from_option(int option) {
  if (option < 1 || option > 5) {
    throw PreconditionError(fmt::format("relevance option {} outside 1..5", option));
  }
  return 6 - option;
}

void validate_vote(const ValidationVote& vote) {
  if (vote.validator_id.empty()) throw PreconditionError("vote has an empty validator_id");
  if (vote.image_id.empty()) throw PreconditionError("vote has an empty image_id");
  if (vote.relevance < 1 || vote.relevance > 5) {
    throw PreconditionError(
        fmt::format("relevance {} outside 1..5 for {}", vote.relevance, vote.image_id));
  }
}

std::string_view to_string(Tri value) {
  switch (value) {
    case Tri::False: return "False";
    case Tri::None: return "None";
    case Tri::True: return "True";
  }
  return "None";
}

VerdictAverages compute_averages(std::span<const ValidationVote> votes) {
  if (votes.empty()) throw NoVotesError("no votes to average");
  VerdictAverages averages;
  long long quality = 0;
  long long relevance = 0;
  long long caption_yes = 0;
  long long caption_counted = 0;
  for (const auto& vote : votes) {
    quality += vote.photo_quality_ok ? 1 : 0;
    relevance += vote.relevance;
    if (vote.caption_fits != CaptionFit::unsure) {
      ++caption_counted;
      caption_yes += vote.caption_fits == CaptionFit::yes ? 1 : 0;
    }
  }
  const auto n = static_cast<double>(votes.size());
  averages.photo_quality = static_cast<double>(quality) / n;
  averages.relevance = static_cast<double>(relevance) / n;
  if (caption_counted > 0) {
    averages.caption_fit = static_cast<double>(caption_yes) / static_cast<double>(caption_counted);
  }
  return averages;
}

QAVerdict decide_verdict(std::string image_id, const VerdictAverages& averages,
                         std::size_t n_validators) {
  QAVerdict verdict;
  verdict.image_id = std::move(image_id);
  verdict.n_validators = n_validators;
  verdict.averages = averages;
  verdict.quality = metric_flag(averages.photo_quality > kQualityPass, n_validators);
  verdict.relevance = metric_flag(averages.relevance >= kRelevancePass, n_validators);
  verdict.caption = averages.caption_fit
                        ? metric_flag(*averages.caption_fit > kCaptionPass, n_validators)
                        : Tri::None;
  const Tri parts[] = {verdict.quality, verdict.relevance, verdict.caption};
  if (std::any_of(std::begin(parts), std::end(parts), [](Tri t) { return t == Tri::False; })) {
    verdict.overall = Tri::False;
  } else if (std::all_of(std::begin(parts), std::end(parts),
                         [](Tri t) { return t == Tri::True; })) {
    verdict.overall = Tri::True;
  } else {
    verdict.overall = Tri::None;
  }
  return verdict;
}

QAVerdict aggregate_verdict(std::span<const ValidationVote> votes) {
  if (votes.empty()) throw NoVotesError("no votes for image");
  std::set<std::string_view> validators;
  bool pii = false;
  for (const auto& vote : votes) {
    validate_vote(vote);
    if (vote.image_id != votes.front().image_id) {
      throw PreconditionError("votes for more than one image passed to aggregate_verdict");
    }
    if (!validators.insert(vote.validator_id).second) {
      throw PreconditionError(
          fmt::format("{} voted twice on {}", vote.validator_id, vote.image_id));
    }
    pii = pii || vote.pii_flag;
  }
  QAVerdict verdict = decide_verdict(votes.front().image_id, compute_averages(votes), votes.size());
  verdict.pii_flagged = pii;
  return verdict;
}

std::vector<QAVerdict> aggregate_all(std::span<const ValidationVote> votes) {
  std::map<std::string, std::vector<ValidationVote>> by_image;
  for (const auto& vote : votes) by_image[vote.image_id].push_back(vote);
  std::vector<QAVerdict> out;
  out.reserve(by_image.size());
  for (const auto& [image, image_votes] : by_image) out.push_back(aggregate_verdict(image_votes));
  return out;
}

double vote_agreement(const ValidationVote& a, const ValidationVote& b) {
  int matching = 0;
  matching += a.photo_quality_ok == b.photo_quality_ok ? 1 : 0;
  matching += (a.relevance >= kRelevancePass) == (b.relevance >= kRelevancePass) ? 1 : 0;
  matching += a.caption_fits == b.caption_fits ? 1 : 0;
  return matching / 3.0;
}

bool needs_escalation(std::span<const ValidationVote> votes) {
  if (votes.size() != 2) {
    throw PreconditionError(
        fmt::format("escalation is decided on exactly two votes, got {}", votes.size()));
  }
  return vote_agreement(votes[0], votes[1]) < 0.8;
}

std::vector<std::string> escalation_queue(std::span<const ValidationVote> votes) {
  std::map<std::string, std::vector<ValidationVote>> by_image;
  for (const auto& vote : votes) by_image[vote.image_id].push_back(vote);
  std::vector<std::string> out;
  for (const auto& [image, image_votes] : by_image) {
    if (image_votes.size() == 2 && needs_escalation(image_votes)) out.push_back(image);
  }
  return out;
}

std::vector<std::string> redaction_queue(std::span<const ValidationVote> votes) {
  std::set<std::string> flagged;
  for (const auto& vote : votes) {
    if (vote.pii_flag) flagged.insert(vote.image_id);
  }
  return {flagged.begin(), flagged.end()};
}

json vote_to_json(const ValidationVote& vote) {
  return json{{"validator_id", vote.validator_id},
              {"image_id", vote.image_id},
              {"photo_quality_ok", vote.photo_quality_ok},
              {"relevance", vote.relevance},
              {"caption_fits", to_string(vote.caption_fits)},
              {"pii_flag", vote.pii_flag}};
}

ValidationVote vote_from_json(const json& in) {
  if (!in.is_object()) throw ParseError("vote is not an object");
  ValidationVote vote;
  const auto& validator = require(in, "validator_id");
  const auto& image = require(in, "image_id");
  const auto& quality = require(in, "photo_quality_ok");
  const auto& relevance = require(in, "relevance");
  const auto& caption = require(in, "caption_fits");
  if (!validator.is_string() || !image.is_string()) throw ParseError("ids must be strings");
  if (!quality.is_boolean()) throw ParseError("photo_quality_ok must be a boolean");
  if (!relevance.is_number_integer()) throw ParseError("relevance must be an integer");
  if (!caption.is_string()) throw ParseError("caption_fits must be a string");
  vote.validator_id = validator.get<std::string>();
  vote.image_id = image.get<std::string>();
  vote.photo_quality_ok = quality.get<bool>();
  vote.relevance = relevance.get<int>();
  const auto fit = parse_caption_fit(caption.get<std::string>());
  if (!fit) throw ParseError("caption_fits must be yes, no or unsure");
  vote.caption_fits = *fit;
  if (const auto it = in.find("pii_flag"); it != in.end() && !it->is_null()) {
    if (!it->is_boolean()) throw ParseError("pii_flag must be a boolean");
    vote.pii_flag = it->get<bool>();
  }
  try {
    validate_vote(vote);
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
  return vote;
}

std::vector<ValidationVote> read_votes(const fs::path& path) {
  std::vector<ValidationVote> votes;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_json_line(path, [&](const json& line) {
    ValidationVote vote = vote_from_json(line);
    if (!seen.emplace(vote.validator_id, vote.image_id).second) {
      throw DuplicateRatingError(
          fmt::format("{} voted twice on {}", vote.validator_id, vote.image_id));
    }
    votes.push_back(std::move(vote));
  });
  return votes;
}

void write_votes(const fs::path& path, std::span<const ValidationVote> votes) {
  std::string out;
  for (const auto& vote : votes) out += vote_to_json(vote).dump() + "\n";
  write_file_atomic(path, out);
}

std::string verdicts_csv(std::span<const QAVerdict> verdicts) {
  std::string out =
      "image_id,n_validators,avg_photo_quality,avg_relevance,avg_caption_fit,quality,relevance,"
      "caption,overall,pii_flagged\n";
  for (const auto& v : verdicts) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", v.image_id, v.n_validators,
                       average_text(v.averages.photo_quality), average_text(v.averages.relevance),
                       average_text(v.averages.caption_fit), to_string(v.quality),
                       to_string(v.relevance), to_string(v.caption), to_string(v.overall),
                       v.pii_flagged ? "true" : "false");
  }
  return out;
}

std::string render_verdicts(std::span<const QAVerdict> verdicts) {
  std::size_t counts[3] = {0, 0, 0};
  std::size_t pii = 0;
  for (const auto& v : verdicts) {
    ++counts[static_cast<int>(v.overall)];
    pii += v.pii_flagged ? 1 : 0;
  }
  std::string out = fmt::format("{:<24} {:>4} {:>8} {:>10} {:>8} {:>8}\n", "image", "n", "quality",
                                "relevance", "caption", "overall");
  for (const auto& v : verdicts) {
    out += fmt::format("{:<24} {:>4} {:>8} {:>10} {:>8} {:>8}\n", v.image_id, v.n_validators,
                       to_string(v.quality), to_string(v.relevance), to_string(v.caption),
                       to_string(v.overall));
  }
  out += fmt::format("overall True: {}, None: {}, False: {}; PII flagged: {}\n", counts[2],
                     counts[1], counts[0], pii);
  return out;
}

int image_points(Region region) {
  switch (region) {
    case Region::ID:
    case Region::SG:
    case Region::PH: return 2;
    case Region::TH:
    case Region::MY:
    case Region::VN: return 3;
    case Region::BN:
    case Region::LA:
    case Region::KH:
    case Region::MM:
    case Region::TL: return 4;
  }
  throw UnknownCountryError("unknown region");
}

int image_points(std::string_view country_code) {
  const auto region = parse_region(country_code);
  if (!region) throw UnknownCountryError(fmt::format("unknown country code '{}'", country_code));
  return image_points(*region);
}

int image_points(const RegionSet& regions) {
  if (regions.empty()) throw PreconditionError("an image needs at least one region");
  int best = 0;
  for (const Region r : regions) best = std::max(best, image_points(r));
  return best;
}

std::string_view to_string(ActivityKind kind) {
  switch (kind) {
    case ActivityKind::image_submission: return "image_submission";
    case ActivityKind::validation: return "validation";
    case ActivityKind::assigned: return "assigned";
  }
  return "unknown";
}

std::optional<ActivityKind> parse_activity_kind(std::string_view text) {
  for (const auto kind :
       {ActivityKind::image_submission, ActivityKind::validation, ActivityKind::assigned}) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

long long activity_points(const Activity& activity) {
  if (activity.count < 0) throw PreconditionError("activity count must be non-negative");
  switch (activity.kind) {
    case ActivityKind::image_submission: return activity.count * image_points(activity.regions);
    case ActivityKind::validation: return activity.count * kValidationPoints;
    case ActivityKind::assigned:
      if (activity.points < 0) throw PreconditionError("assigned points must be non-negative");
      return activity.points;
  }
  return 0;
}

void award_in_place(ContributionLedger& ledger, std::string_view contributor,
                    const Activity& activity) {
  if (contributor.empty()) throw PreconditionError("contributor id is empty");
  const long long points = activity_points(activity);
  auto& entry = ledger.contributors[std::string(contributor)];
  switch (activity.kind) {
    case ActivityKind::image_submission: entry.image_points += points; break;
    case ActivityKind::validation: entry.validation_points += points; break;
    case ActivityKind::assigned: entry.assigned_points += points; break;
  }
}

ContributionLedger award(ContributionLedger ledger, std::string_view contributor,
                         const Activity& activity) {
  award_in_place(ledger, contributor, activity);
  return ledger;
}

Authorship authorship_order(const ContributionLedger& ledger) {
  std::vector<RankedContributor> authors;
  std::vector<RankedContributor> acknowledged;
  for (const auto& [id, points] : ledger.contributors) {
    auto& target = points.total() >= ledger.co_author_threshold ? authors : acknowledged;
    target.push_back(RankedContributor{id, points.total()});
  }
  return Authorship{ranked(std::move(authors)), ranked(std::move(acknowledged))};
}

json event_to_json(const LedgerEvent& event) {
  json out{{"contributor", event.contributor}, {"activity", to_string(event.activity.kind)}};
  switch (event.activity.kind) {
    case ActivityKind::image_submission: {
      json regions = json::array();
      for (const Region r : event.activity.regions) regions.push_back(region_code(r));
      out["regions"] = std::move(regions);
      out["count"] = event.activity.count;
      break;
    }
    case ActivityKind::validation: out["count"] = event.activity.count; break;
    case ActivityKind::assigned: out["points"] = event.activity.points; break;
  }
  return out;
}

LedgerEvent event_from_json(const json& in) {
  if (!in.is_object()) throw ParseError("ledger event is not an object");
  LedgerEvent event;
  const auto& contributor = require(in, "contributor");
  const auto& activity = require(in, "activity");
  if (!contributor.is_string() || !activity.is_string()) {
    throw ParseError("contributor and activity must be strings");
  }
  event.contributor = contributor.get<std::string>();
  const auto kind = parse_activity_kind(activity.get<std::string>());
  if (!kind) throw ParseError(fmt::format("unknown activity '{}'", activity.get<std::string>()));
  event.activity.kind = *kind;
  if (const auto it = in.find("count"); it != in.end()) {
    if (!it->is_number_integer()) throw ParseError("count must be an integer");
    event.activity.count = it->get<long long>();
  }
  if (*kind == ActivityKind::image_submission) {
    const auto& regions = require(in, "regions");
    if (!regions.is_array()) throw ParseError("regions must be an array");
    for (const auto& code : regions) {
      if (!code.is_string()) throw ParseError("region codes must be strings");
      const auto region = parse_region(code.get<std::string>());
      if (!region) {
        throw UnknownCountryError(
            fmt::format("unknown country code '{}'", code.get<std::string>()));
      }
      event.activity.regions.insert(*region);
    }
  }
  if (*kind == ActivityKind::assigned) {
    const auto& points = require(in, "points");
    if (!points.is_number_integer()) throw ParseError("points must be an integer");
    event.activity.points = points.get<long long>();
  }
  try {
    activity_points(event.activity);
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
  return event;
}

std::vector<LedgerEvent> read_ledger_events(const fs::path& path) {
  std::vector<LedgerEvent> events;
  for_each_json_line(path, [&](const json& line) { events.push_back(event_from_json(line)); });
  return events;
}

void append_ledger_event(const fs::path& path, const LedgerEvent& event) {
  activity_points(event.activity);
  std::ofstream out(path, std::ios::app | std::ios::binary);
  out << event_to_json(event).dump() << "\n";
  if (!out) throw IoError(fmt::format("failed to append to {}", path.string()));
}

ContributionLedger replay(std::span<const LedgerEvent> events, long long co_author_threshold) {
  ContributionLedger ledger;
  ledger.co_author_threshold = co_author_threshold;
  for (const auto& event : events) award_in_place(ledger, event.contributor, event.activity);
  return ledger;
}

std::string ledger_csv(const ContributionLedger& ledger) {
  std::string out = "contributor,image_points,validation_points,assigned_points,total,co_author\n";
  for (const auto& [id, p] : ledger.contributors) {
    out += fmt::format("{},{},{},{},{},{}\n", id, p.image_points, p.validation_points,
                       p.assigned_points, p.total(),
                       p.total() >= ledger.co_author_threshold ? "true" : "false");
  }
  return out;
}

std::string render_authorship(const Authorship& authorship) {
  std::string out = "authors:\n";
  for (const auto& c : authorship.authors) out += fmt::format("  {:<24} {:>8}\n", c.id, c.total);
  out += "acknowledged:\n";
  for (const auto& c : authorship.acknowledged) {
    out += fmt::format("  {:<24} {:>8}\n", c.id, c.total);
  }
  return out;
}

}  // namespace curator::qa
