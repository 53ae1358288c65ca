#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "curator/calibration/calibration.hpp"
#include "curator/calibration/ratings.hpp"

namespace httplib {
class Server;
}

namespace curator::calibration {

// One unit of rating work. Pair items carry two images.
struct ReviewItem {
  std::string item_id;
  std::vector<std::string> image_ids;
  std::optional<BucketLabel> bucket;
  std::optional<std::string> caption;
};

// Everything the review server hands out, plus where images live on disk.
struct TaskCatalog {
  Sample sample;                   // bucket_relevance items
  std::vector<ReviewItem> pairs;   // dedup_pair items
  std::vector<ReviewItem> likert;  // likert_correctness and likert_naturalness items
  LikertSubject likert_subject = LikertSubject::caption;
  std::map<std::string, std::filesystem::path> images;  // image id -> file

  std::vector<ReviewItem> items(TaskKind task) const;
};

// Adds the sampled bucket items (with their image paths) to a catalog.
TaskCatalog make_catalog(Sample sample);
// Adds the top pairs of a pair sample; image paths come from `corpus`.
void add_pairs(TaskCatalog& catalog, const PairSample& pairs, const Corpus& corpus);

struct ReviewServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  double target_relevance_pct = 85.0;
  std::optional<std::filesystem::path> static_dir;  // built UI assets, served at /
};

// HTTP API for the rating loop:
//   GET  /api/tasks/next?rater=<id>&task=<kind>  200 item | 204 nothing left
//   POST /api/ratings                            201 | 400 invalid | 409 duplicate
//   GET  /api/stats/buckets                      per-bucket relevance + recommended rho
//   GET  /api/stats/agreement                    agreement per task
//   GET  /img/<id>                               image bytes
// Statistics are recomputed from a log snapshot on every request, so readers
// never block rating ingestion for longer than the copy.
class ReviewServer {
 public:
  ReviewServer(TaskCatalog catalog, RatingLog& log, ReviewServerOptions options = {});
  ~ReviewServer();

  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Binds the socket and returns the port. Throws IoError.
  int bind();
  // Serves until stop(); bind() is called first when needed.
  void listen();
  // bind() and serve on a background thread.
  int start();
  void stop();

  // JSON bodies of the stats endpoints, also used by the CLI.
  std::string bucket_stats_json() const;
  std::string agreement_json() const;

 private:
  void install_routes();

  TaskCatalog catalog_;
  RatingLog& log_;
  ReviewServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace curator::calibration
