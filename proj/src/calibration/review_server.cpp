#include "curator/calibration/review_server.hpp"

#include <chrono>
#include <unordered_map>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "curator/core/errors.hpp"
#include "curator/core/io.hpp"

namespace curator::calibration {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t now_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string content_type_for(const fs::path& path) {
  static const std::unordered_map<std::string, std::string> kTypes = {
      {".jpg", "image/jpeg"}, {".jpeg", "image/jpeg"}, {".png", "image/png"},
      {".gif", "image/gif"},  {".webp", "image/webp"}, {".bmp", "image/bmp"},
      {".tiff", "image/tiff"}};
  const auto it = kTypes.find(path.extension().string());
  return it == kTypes.end() ? "application/octet-stream" : it->second;
}

json rubric_json(TaskKind task, LikertSubject subject) {
  json rubric = json::array();
  switch (task) {
    case TaskKind::bucket_relevance: {
      int option = 1;
      for (const auto text : relevance_guideline()) {
        rubric.push_back({{"value", option},
                          {"label", text},
                          {"maps_to", to_string(*relevance_from_guideline_option(option))}});
        ++option;
      }
      break;
    }
    case TaskKind::dedup_pair:
      rubric.push_back({{"value", true}, {"label", "Duplicate"}});
      rubric.push_back({{"value", false}, {"label", "Not a duplicate"}});
      break;
    case TaskKind::likert_correctness:
    case TaskKind::likert_naturalness: {
      int score = 3;
      for (const auto text : likert_rubric(task, subject)) {
        rubric.push_back({{"value", score--}, {"label", text}});
      }
      break;
    }
  }
  return rubric;
}

json error_body(std::string_view message) {
  return json{{"error", message}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json agreement_entry(std::span<const RatingRecord> ratings, TaskKind task) {
  const LabelGroups groups = group_labels(ratings, task);
  json entry;
  std::size_t multi = 0;
  json escalate = json::array();
  for (const auto& [item, labels] : groups) {
    if (labels.size() < 2) continue;
    ++multi;
    if (needs_additional_rater(item_agreement(labels))) escalate.push_back(item);
  }
  entry["items"] = groups.size();
  entry["multi_rated_items"] = multi;
  if (multi == 0) {
    entry["percent_agreement"] = nullptr;
    entry["chance_corrected"] = nullptr;
  } else {
    entry["percent_agreement"] = percent_agreement(groups);
    entry["chance_corrected"] = chance_corrected_agreement(groups);
  }
  entry["needs_additional_rater"] = std::move(escalate);
  return entry;
}

}  // namespace

std::vector<ReviewItem> TaskCatalog::items(TaskKind task) const {
  switch (task) {
    case TaskKind::bucket_relevance: {
      std::vector<ReviewItem> out;
      for (const auto& bucket : sample.buckets) {
        for (const auto& item : bucket.items) {
          out.push_back(ReviewItem{item.id, {item.id}, item.bucket, std::nullopt});
        }
      }
      return out;
    }
    case TaskKind::dedup_pair: return pairs;
    case TaskKind::likert_correctness:
    case TaskKind::likert_naturalness: return likert;
  }
  return {};
}

TaskCatalog make_catalog(Sample sample) {
  TaskCatalog catalog;
  for (const auto& bucket : sample.buckets) {
    for (const auto& item : bucket.items) {
      if (item.local_path) catalog.images[item.id] = *item.local_path;
    }
  }
  catalog.sample = std::move(sample);
  return catalog;
}

void add_pairs(TaskCatalog& catalog, const PairSample& pairs, const Corpus& corpus) {
  std::unordered_map<std::string, const ImageRecord*> by_id;
  for (const auto& record : corpus) by_id.emplace(record.id, &record);
  for (const auto& pair : pairs.pairs) {
    for (const auto* id : {&pair.id_a, &pair.id_b}) {
      const auto it = by_id.find(*id);
      if (it != by_id.end() && it->second->local_path) {
        catalog.images[*id] = *it->second->local_path;
      }
    }
    catalog.pairs.push_back(
        ReviewItem{pair_item_id(pair.id_a, pair.id_b), {pair.id_a, pair.id_b}, {}, {}});
  }
}

ReviewServer::ReviewServer(TaskCatalog catalog, RatingLog& log, ReviewServerOptions options)
    : catalog_(std::move(catalog)),
      log_(log),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ReviewServer::~ReviewServer() {
  stop();
}

std::string ReviewServer::bucket_stats_json() const {
  const auto ratings = log_.snapshot();
  const RelevanceReport report = bucket_relevance(ratings, catalog_.sample);
  json body;
  body["target_relevance_pct"] = options_.target_relevance_pct;
  json buckets = json::array();
  for (const auto& stat : report.stats) {
    json entry;
    entry["bucket"] = to_string(stat.bucket.label);
    entry["lower"] = stat.bucket.lower;
    entry["upper"] = std::isinf(stat.bucket.upper) ? json(nullptr) : json(stat.bucket.upper);
    entry["n_items"] = stat.n_items;
    entry["n_relevant"] = stat.n_relevant;
    entry["relevance_pct"] = stat.relevance_pct;
    entry["agreement"] = stat.agreement ? json(*stat.agreement) : json(nullptr);
    buckets.push_back(std::move(entry));
  }
  body["buckets"] = std::move(buckets);
  body["unrated"] = report.unrated.size();
  body["low_information"] = report.low_information.size();
  if (report.stats.empty()) {
    body["recommended"] = nullptr;
  } else {
    const auto rec = recommend_threshold(report.stats, options_.target_relevance_pct);
    body["recommended"] = {{"boundary", rec.boundary},
                           {"rho", rec.rho},
                           {"bucket", to_string(rec.bucket)},
                           {"target_met", rec.target_met},
                           {"warning", rec.warning}};
  }
  return body.dump();
}

std::string ReviewServer::agreement_json() const {
  const auto ratings = log_.snapshot();
  json body;
  for (const TaskKind task : kAllTaskKinds) {
    body[std::string(to_string(task))] = agreement_entry(ratings, task);
  }
  return body.dump();
}

void ReviewServer::install_routes() {
  auto& server = *server_;

  server.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string rater = req.get_param_value("rater");
    const auto task = parse_task_kind(req.get_param_value("task"));
    if (rater.empty() || !task) {
      send_json(res, 400, error_body("expected ?rater=<id>&task=<kind>"));
      return;
    }
    const auto items = catalog_.items(*task);
    std::size_t remaining = 0;
    const ReviewItem* next = nullptr;
    for (const auto& item : items) {
      if (log_.contains(rater, item.item_id, *task)) continue;
      ++remaining;
      if (!next) next = &item;
    }
    if (!next) {
      res.status = 204;
      return;
    }
    json body;
    body["item_id"] = next->item_id;
    body["task"] = to_string(*task);
    json images = json::array();
    for (const auto& id : next->image_ids) images.push_back("/img/" + id);
    body["images"] = std::move(images);
    body["bucket"] = next->bucket ? json(to_string(*next->bucket)) : json(nullptr);
    body["caption"] = next->caption ? json(*next->caption) : json(nullptr);
    body["rubric"] = rubric_json(*task, catalog_.likert_subject);
    body["remaining"] = remaining;
    body["total"] = items.size();
    send_json(res, 200, body);
  });

  server.Post("/api/ratings", [this](const httplib::Request& req, httplib::Response& res) {
    RatingRecord rating;
    try {
      json body = json::parse(req.body);
      if (body.is_object() && !body.contains("timestamp")) body["timestamp"] = now_millis();
      rating = rating_from_json(body);
    } catch (const json::exception& e) {
      send_json(res, 400, error_body(e.what()));
      return;
    } catch (const ParseError& e) {
      send_json(res, 400, error_body(e.what()));
      return;
    }
    bool known = false;
    for (const auto& item : catalog_.items(rating.task))
      known = known || item.item_id == rating.item_id;
    if (!known) {
      send_json(
          res, 400,
          error_body(fmt::format("unknown {} item '{}'", to_string(rating.task), rating.item_id)));
      return;
    }
    try {
      log_.append(rating);
    } catch (const DuplicateRatingError& e) {
      send_json(res, 409, error_body(e.what()));
      return;
    } catch (const PreconditionError& e) {
      send_json(res, 400, error_body(e.what()));
      return;
    } catch (const IoError& e) {
      send_json(res, 500, error_body(e.what()));
      return;
    }
    send_json(res, 201, rating_to_json(rating));
  });

  server.Get("/api/stats/buckets", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(bucket_stats_json(), "application/json");
  });

  server.Get("/api/stats/agreement", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(agreement_json(), "application/json");
  });

  server.Get(R"(/img/([A-Za-z0-9._-]+))",
             [this](const httplib::Request& req, httplib::Response& res) {
               const auto it = catalog_.images.find(req.matches[1].str());
               if (it == catalog_.images.end()) {
                 send_json(res, 404, error_body("unknown image"));
                 return;
               }
               try {
                 const Bytes bytes = read_file_bytes(it->second);
                 res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(),
                                 content_type_for(it->second));
               } catch (const IoError& e) {
                 send_json(res, 404, error_body(e.what()));
               }
             });

  if (options_.static_dir) {
    if (!server.set_mount_point("/", options_.static_dir->string())) {
      throw IoError(fmt::format("static directory {} not found", options_.static_dir->string()));
    }
  }
}

int ReviewServer::bind() {
  if (port_ > 0) return port_;
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    throw IoError(fmt::format("cannot bind {}:{}", options_.host, options_.port));
  }
  return port_;
}

void ReviewServer::listen() {
  bind();
  server_->listen_after_bind();
}

int ReviewServer::start() {
  const int port = bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void ReviewServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace curator::calibration
