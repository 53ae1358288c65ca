#include <doctest.h>

#include <json.hpp>

#include "curator/calibration/review_server.hpp"
#include "curator/core/io.hpp"
#include "support.hpp"

using namespace curator;
using namespace curator::calibration;
using nlohmann::json;

namespace {

// Ten items per scoring bucket, each backed by a synthetic PNG.
struct Fixture {
  testing::TempDir dir;
  Corpus corpus;
  Sample sample;

  Fixture() {
    corpus = testing::write_synthetic_corpus(dir.path(), 50, 1, 32);
    filter::ScoredCorpus scored;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      filter::ScoredEntry entry;
      entry.record = corpus[i];
      entry.bucket = static_cast<BucketLabel>(1 + i / 10);
      entry.score = bucket_of(entry.bucket).lower / 100.0 + 0.001;
      scored.entries.push_back(entry);
    }
    sample = stratified_sample(scored, 10, 5);
  }
};

json get_json(httplib::Client& client, const std::string& path) {
  const auto res = client.Get(path);
  REQUIRE(res);
  REQUIRE(res->status == 200);
  return json::parse(res->body);
}

int post_rating(httplib::Client& client, const json& body) {
  const auto res = client.Post("/api/ratings", body.dump(), "application/json");
  REQUIRE(res);
  return res->status;
}

}  // namespace

TEST_CASE("review API round trip for every task kind") {
  Fixture fx;
  auto catalog = make_catalog(fx.sample);
  const std::vector<dedup::ScoredPair> pairs = {{"img0000", "img0001", 3}};
  add_pairs(catalog, sample_top_pairs(pairs, dedup::Method::phash, 5), fx.corpus);
  catalog.likert.push_back(ReviewItem{"cap1", {"img0002"}, std::nullopt, "A bowl of pho"});
  RatingLog log(fx.dir / "ratings.jsonl");
  ReviewServer server(std::move(catalog), log);
  const int port = server.start();
  httplib::Client client("127.0.0.1", port);

  const auto task = get_json(client, "/api/tasks/next?rater=alice&task=bucket_relevance");
  CHECK(task["total"] == 50);
  CHECK(task["remaining"] == 50);
  CHECK(task["images"].size() == 1);
  const auto image = client.Get(task["images"][0].get<std::string>());
  REQUIRE(image);
  CHECK(image->status == 200);
  CHECK(image->get_header_value("Content-Type") == "image/png");

  CHECK(post_rating(client, {{"rater_id", "alice"},
                             {"item_id", task["item_id"]},
                             {"task", "bucket_relevance"},
                             {"value", 1}}) == 201);
  const auto buckets = get_json(client, "/api/stats/buckets");
  CHECK(buckets["buckets"].size() == 1);
  CHECK(buckets["buckets"][0]["n_items"] == 1);
  CHECK(buckets["unrated"] == 49);
  CHECK(get_json(client, "/api/tasks/next?rater=alice&task=bucket_relevance")["remaining"] == 49);

  const auto pair = get_json(client, "/api/tasks/next?rater=alice&task=dedup_pair");
  CHECK(pair["item_id"] == "img0000:img0001");
  CHECK(pair["images"].size() == 2);
  CHECK(post_rating(client, {{"rater_id", "alice"},
                             {"item_id", "img0000:img0001"},
                             {"task", "dedup_pair"},
                             {"value", true}}) == 201);
  const auto none = client.Get("/api/tasks/next?rater=alice&task=dedup_pair");
  REQUIRE(none);
  CHECK(none->status == 204);

  const auto lk = get_json(client, "/api/tasks/next?rater=alice&task=likert_correctness");
  CHECK(lk["caption"] == "A bowl of pho");
  CHECK(lk["rubric"].size() == 3);
  CHECK(post_rating(client, {{"rater_id", "alice"},
                             {"item_id", "cap1"},
                             {"task", "likert_correctness"},
                             {"value", 3}}) == 201);
  CHECK(post_rating(client, {{"rater_id", "alice"},
                             {"item_id", "cap1"},
                             {"task", "likert_naturalness"},
                             {"value", 2}}) == 201);

  const auto agreement = get_json(client, "/api/stats/agreement");
  CHECK(agreement["dedup_pair"]["items"] == 1);
  CHECK(agreement["likert_naturalness"]["items"] == 1);

  server.stop();
  CHECK(read_ratings(fx.dir / "ratings.jsonl").size() == 4);
}

TEST_CASE("review API rejects bad requests") {
  Fixture fx;
  RatingLog log;
  ReviewServer server(make_catalog(fx.sample), log);
  httplib::Client client("127.0.0.1", server.start());
  const auto id = fx.sample.buckets[0].items[0].id;

  CHECK(post_rating(client, {{"rater_id", "a"},
                             {"item_id", "nope"},
                             {"task", "bucket_relevance"},
                             {"value", "yes"}}) == 400);
  CHECK(post_rating(client, {{"rater_id", "a"},
                             {"item_id", id},
                             {"task", "bucket_relevance"},
                             {"value", "maybe"}}) == 400);
  const auto garbage = client.Post("/api/ratings", "{not json", "application/json");
  REQUIRE(garbage);
  CHECK(garbage->status == 400);
  CHECK(post_rating(
            client,
            {{"rater_id", "a"}, {"item_id", id}, {"task", "bucket_relevance"}, {"value", "yes"}}) ==
        201);
  CHECK(post_rating(
            client,
            {{"rater_id", "a"}, {"item_id", id}, {"task", "bucket_relevance"}, {"value", "no"}}) ==
        409);
  const auto missing_task = client.Get("/api/tasks/next?rater=a");
  REQUIRE(missing_task);
  CHECK(missing_task->status == 400);
  const auto unknown_image = client.Get("/img/not-there");
  REQUIRE(unknown_image);
  CHECK(unknown_image->status == 404);
  CHECK(log.snapshot().front().timestamp > 0);
}

TEST_CASE("seeded ratings drive the recommended boundary to 54.5") {
  Fixture fx;
  RatingLog log;
  // Bronze..Gold at 60%, Platinum and Diamond at 90%.
  for (const auto& bucket : fx.sample.buckets) {
    const bool top = bucket.bucket >= BucketLabel::Platinum;
    for (std::size_t i = 0; i < bucket.items.size(); ++i) {
      const bool yes = i < (top ? 9u : 6u);
      log.append({"r1", bucket.items[i].id, TaskKind::bucket_relevance,
                  yes ? Relevance::yes : Relevance::no, 1});
    }
  }
  ReviewServerOptions options;
  options.target_relevance_pct = 85;
  ReviewServer server(make_catalog(fx.sample), log, options);
  httplib::Client client("127.0.0.1", server.start());
  const auto body = get_json(client, "/api/stats/buckets");
  CHECK(body["recommended"]["boundary"] == 54.5);
  CHECK(body["recommended"]["bucket"] == "Platinum");
  CHECK(body["buckets"].size() == 5);
}

TEST_CASE("empty log gives an empty dashboard and a second identical rater agrees fully") {
  Fixture fx;
  RatingLog log;
  ReviewServer server(make_catalog(fx.sample), log);
  const auto empty = json::parse(server.bucket_stats_json());
  CHECK(empty["buckets"].empty());
  CHECK(empty["recommended"].is_null());
  const auto id = fx.sample.buckets[0].items[0].id;
  log.append({"a", id, TaskKind::bucket_relevance, Relevance::yes, 1});
  log.append({"b", id, TaskKind::bucket_relevance, Relevance::yes, 2});
  const auto agreement = json::parse(server.agreement_json());
  CHECK(agreement["bucket_relevance"]["percent_agreement"] == 1.0);
  CHECK(agreement["bucket_relevance"]["needs_additional_rater"].empty());
}

TEST_CASE("static assets are served at the root") {
  Fixture fx;
  write_file_atomic(fx.dir / "ui" / "index.html", std::string_view("<html>ok</html>"));
  RatingLog log;
  ReviewServerOptions options;
  options.static_dir = fx.dir / "ui";
  ReviewServer server(make_catalog(fx.sample), log, options);
  httplib::Client client("127.0.0.1", server.start());
  const auto res = client.Get("/index.html");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == "<html>ok</html>");
}
