// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "curator/calibration/calibration.hpp"
#include "curator/core/io.hpp"
#include "curator/dedup/dedup.hpp"
#include "curator/dedup/phash.hpp"
#include "curator/embed/provider.hpp"
#include "curator/filter/filter.hpp"
#include "curator/image/codec.hpp"
#include "curator/image/synthetic.hpp"
#include "curator/pipeline/pipeline.hpp"
#include "curator/qa/qa.hpp"
#include "support.hpp"

using namespace curator;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Thrown by a check to fail the running criterion with a reason.
struct Failure {
  std::string reason;
};

void expect(bool condition, const std::string& reason) {
  if (!condition) throw Failure{reason};
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<float> floats(const EmbeddingVector& v) {
  const auto values = v.values();
  return {values.begin(), values.end()};
}

embed::ProviderConfig deterministic(std::size_t dims) {
  embed::ProviderConfig config;
  config.dims = dims;
  return config;
}

// ---- 1 -----------------------------------------------------------------

void mean_similarity_oracle() {
  const auto start = Clock::now();
  testing::TempDir dir;
  const auto corpus = testing::write_synthetic_corpus(dir / "corpus", 200, 1000, 32);
  const auto refs = testing::write_synthetic_corpus(dir / "refs", 10, 5000, 32);
  auto provider = embed::Provider::create(deterministic(128));

  filter::FilterConfig config;
  config.prefilter_floor = -1.0;
  std::vector<std::vector<float>> ref_values;
  for (const auto& r : refs) {
    const auto e = provider->encode(ByteView(read_file_bytes(*r.local_path)));
    config.reference.embeddings.push_back(e);
    ref_values.push_back(floats(e));
  }
  std::vector<std::string> ids;
  std::vector<std::vector<float>> values;
  std::vector<double> scores;
  for (const auto& r : corpus) {
    ids.push_back(r.id);
    values.push_back(floats(provider->encode(ByteView(read_file_bytes(*r.local_path)))));
    scores.push_back(oracle::mean_similarity(values.back(), ref_values));
  }
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pick(*lo, *hi);
  for (int trial = 0; trial < 20; ++trial) {
    config.rho = pick(rng);
    const auto scored = filter::filter_corpus(corpus, *provider, config);
    const auto got = scored.retained_ids();
    const std::set<std::string> library(got.begin(), got.end());
    expect(library == oracle::retained(ids, values, ref_values, config.rho),
           fmt::format("retained set differs from the oracle at rho={}", config.rho));
  }
  const double elapsed = seconds_since(start);
  expect(elapsed < 5.0, fmt::format("took {:.2f}s", elapsed));
}

// ---- 2 -----------------------------------------------------------------

void retention_monotonicity() {
  std::mt19937_64 rng(2);
  std::size_t violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dims = 4 + rng() % 29;
    const std::size_t n = 10 + rng() % 150;
    filter::FilterConfig config;
    config.rho = -1.0;
    config.prefilter_floor = -1.0;
    for (std::size_t r = 0; r < 1 + rng() % 8; ++r) {
      config.reference.embeddings.push_back(testing::random_unit(rng, dims));
    }
    Corpus records(n);
    std::vector<std::optional<EmbeddingVector>> embeddings;
    for (std::size_t i = 0; i < n; ++i) {
      records[i].id = fmt::format("r{:04d}", i);
      embeddings.push_back(testing::random_unit(rng, dims));
    }
    const std::vector<std::string> reasons(n);
    std::uniform_real_distribution<double> pick(-0.6, 0.6);
    std::vector<double> rhos(12);
    for (auto& rho : rhos) rho = pick(rng);
    std::sort(rhos.begin(), rhos.end());
    std::vector<std::set<std::string>> kept;
    for (const double rho : rhos) {
      config.rho = rho;
      const auto ids = filter::score_corpus(records, embeddings, reasons, config).retained_ids();
      kept.emplace_back(ids.begin(), ids.end());
    }
    for (std::size_t i = 1; i < kept.size(); ++i) {
      if (!std::includes(kept[i - 1].begin(), kept[i - 1].end(), kept[i].begin(), kept[i].end())) {
        ++violations;
      }
    }
  }
  expect(violations == 0, fmt::format("{} violations", violations));
}

// ---- 3 -----------------------------------------------------------------

void bucket_arithmetic() {
  struct Row {
    const char* dataset;
    std::array<std::size_t, 5> counts;  // Bronze..Diamond
    std::size_t total;
    std::array<double, 5> printed;
  };
  const Row rows[] = {
      {"CC3M", {11885, 6824, 3841, 2091, 1499}, 3'020'000, {0.40, 0.23, 0.13, 0.07, 0.05}},
      {"COYO", {8925, 5919, 3996, 2323, 2294}, 1'660'000, {0.54, 0.36, 0.24, 0.14, 0.14}},
      {"WiT", {9627, 6715, 4377, 2590, 2162}, 1'460'000, {0.66, 0.46, 0.30, 0.18, 0.15}},
  };
  for (const auto& row : rows) {
    const auto table = filter::retention_from_counts(row.counts, row.total);
    for (std::size_t b = 0; b < 5; ++b) {
      const double pct = table.rows[b + 1].percent;
      expect(
          std::abs(pct - row.printed[b]) <= 0.01,
          fmt::format("{} bucket {}: {:.4f}% vs {:.2f}%", row.dataset, b + 1, pct, row.printed[b]));
    }
  }
}

// ---- 4 -----------------------------------------------------------------

void threshold_recommendation() {
  const std::array<double, 5> relevance = {58, 70, 78, 84, 92};
  std::vector<calibration::BucketRelevanceStat> stats;
  for (std::size_t b = 0; b < 5; ++b) {
    calibration::BucketRelevanceStat stat;
    stat.bucket = bucket_of(static_cast<BucketLabel>(b + 1));
    stat.n_items = 50;
    stat.n_relevant = static_cast<std::size_t>(relevance[b] / 2);
    stat.relevance_pct = relevance[b];
    stats.push_back(stat);
  }
  const auto rec = calibration::recommend_threshold(stats, 84.0);
  expect(rec.boundary == 54.5, fmt::format("boundary {}", rec.boundary));
  expect(rec.target_met, "target reported as missed");
}

// ---- 5 -----------------------------------------------------------------

std::vector<dedup::DedupItem> image_items(std::mt19937_64& rng, embed::Provider& provider) {
  std::vector<Bytes> files;
  for (int base = 0; base < 30; ++base) {
    const auto img = image::synthetic_image(7000 + base, 64, 64);
    files.push_back(image::encode_png(img));
    switch (rng() % 4) {
      case 0: files.push_back(files.back()); break;
      case 1: files.push_back(image::encode_png(image::brighten(img, 12))); break;
      case 2: files.push_back(image::encode_jpeg(img, 90)); break;
      default: break;
    }
  }
  std::vector<dedup::DedupItem> items;
  for (std::size_t i = 0; i < files.size(); ++i) {
    dedup::DedupItem item;
    item.id = fmt::format("f{:03d}", (i * 37) % 1000);
    item.source = rng() % 8 == 0 ? Source::crowdsourced : Source::crawled;
    item.hash = dedup::phash64(ByteView(files[i]));
    item.embedding = provider.encode(ByteView(files[i]));
    items.push_back(std::move(item));
  }
  return items;
}

void dedup_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(5);
  auto provider = embed::Provider::create(deterministic(32));
  for (int corpus = 0; corpus < 50; ++corpus) {
    std::vector<dedup::DedupItem> hashes;
    std::vector<dedup::DedupItem> vectors;
    if (corpus % 10 == 0) {
      hashes = image_items(rng, *provider);
      vectors = hashes;
    } else {
      const std::size_t n = 20 + rng() % 281;
      hashes = testing::planted_hash_items(rng, n);
      vectors = testing::planted_embedding_items(rng, n);
    }
    dedup::DedupConfig phash_config;
    phash_config.method = dedup::Method::phash;
    phash_config.max_hamming = 1 + static_cast<int>(rng() % 16);
    dedup::DedupConfig embedding_config;
    embedding_config.method = dedup::Method::embedding;
    embedding_config.epsilon = 0.95 + 0.04 * static_cast<double>(rng() % 100) / 100.0;

    const auto by_hash = dedup::dedup_corpus(hashes, phash_config);
    expect(by_hash.clusters.size() < hashes.size(), "no duplicates were planted");
    expect(testing::as_oracle(by_hash) == oracle::clusters(hashes, phash_config),
           fmt::format("phash clusters differ on corpus {}", corpus));
    expect(testing::as_oracle(dedup::dedup_corpus(vectors, embedding_config)) ==
               oracle::clusters(vectors, embedding_config),
           fmt::format("embedding clusters differ on corpus {}", corpus));
  }
  const double elapsed = seconds_since(start);
  expect(elapsed < 30.0, fmt::format("took {:.2f}s", elapsed));
}

// ---- 6 -----------------------------------------------------------------

void phash_known_answers() {
  image::RgbImage gray{32, 32, std::vector<std::uint8_t>(32 * 32 * 3, 128)};
  const auto gray_hash = dedup::phash64(gray).bits;
  expect(gray_hash == oracle::phash(gray), "constant gray differs from the oracle");
  expect(gray_hash == 0x8000000000000000ULL, fmt::format("constant gray hash {:016x}", gray_hash));

  for (const int side : {32, 64, 128}) {
    const auto img = image::synthetic_image(600 + side, side, side);
    const auto bits = dedup::phash64(img).bits;
    expect(bits == oracle::phash(img), fmt::format("fixture {} differs from the oracle", side));
    const auto png = image::encode_png(img);
    const Bytes copy = png;
    expect(hamming(dedup::phash64(ByteView(png)), dedup::phash64(ByteView(copy))) == 0,
           "identical bytes hash apart");
  }

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto img = image::synthetic_image(900 + seed, 96, 96);
    const auto jpeg = image::encode_jpeg(img, 90);
    const auto decoded = image::decode(ByteView(jpeg));
    const auto original = dedup::phash64(img);
    const auto recompressed = dedup::phash64(ByteView(jpeg));
    expect(recompressed.bits == oracle::phash(decoded),
           fmt::format("jpeg fixture {} differs from the oracle", seed));
    const int library_distance = hamming(original, recompressed);
    const int oracle_distance = std::popcount(oracle::phash(img) ^ oracle::phash(decoded));
    expect(library_distance == oracle_distance && library_distance <= 16,
           fmt::format("jpeg fixture {} at distance {}", seed, library_distance));
  }
}

// ---- 7 -----------------------------------------------------------------

int tri(qa::Tri t) {
  return t == qa::Tri::False ? -1 : t == qa::Tri::True ? 1 : 0;
}

void verdict_truth_table() {
  const std::array<double, 3> quality = {0.25, 0.5, 0.75};
  const std::array<double, 3> relevance = {2.5, 3.0, 3.5};
  const std::array<double, 3> caption = {0.25, 0.5, 0.75};
  int combinations = 0;
  for (const double q : quality) {
    for (const double r : relevance) {
      for (const double c : caption) {
        for (std::size_t n = 1; n <= 3; ++n) {
          const auto v = qa::decide_verdict("x", {q, r, c}, n);
          const oracle::Flags got{tri(v.quality), tri(v.relevance), tri(v.caption), tri(v.overall)};
          expect(got == oracle::verdict_flags(q, r, c, n),
                 fmt::format("quality {} relevance {} caption {} n {}", q, r, c, n));
          ++combinations;
        }
      }
    }
  }
  expect(combinations == 81, "table incomplete");

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto votes = testing::random_votes(rng, "img");
    const auto v = qa::aggregate_verdict(votes);
    if (v.overall == qa::Tri::True) {
      expect(
          v.quality == qa::Tri::True && v.relevance == qa::Tri::True && v.caption == qa::Tri::True,
          fmt::format("implication broken on trial {}", trial));
    }
    const oracle::Flags got{tri(v.quality), tri(v.relevance), tri(v.caption), tri(v.overall)};
    expect(got == oracle::verdict_flags(v.averages.photo_quality, v.averages.relevance,
                                        v.averages.caption_fit, votes.size()),
           fmt::format("verdict differs from the oracle on trial {}", trial));
  }
}

// ---- 8 -----------------------------------------------------------------

void points_ledger() {
  const std::pair<const char*, int> table[] = {{"ID", 2}, {"SG", 2}, {"PH", 2}, {"TH", 3},
                                               {"MY", 3}, {"VN", 3}, {"BN", 4}, {"LA", 4},
                                               {"KH", 4}, {"MM", 4}, {"TL", 4}};
  for (const auto& [code, points] : table) {
    expect(qa::image_points(code) == points, fmt::format("{} scores {}", code, points));
  }
  expect(qa::activity_points({qa::ActivityKind::validation, {}, 1}) == 1, "validation != 1");
  const auto ledger =
      qa::award({}, "contributor", {qa::ActivityKind::image_submission, {Region::ID}, 100});
  expect(ledger.contributors.at("contributor").total() == 200, "100 ID images != 200 points");
  const auto order = qa::authorship_order(ledger);
  expect(order.authors.size() == 1 && order.authors[0].id == "contributor",
         "not co-author eligible");
}

// ---- 9 -----------------------------------------------------------------

void determinism_and_resume() {
  testing::TempDir dir;
  testing::LocalServer server;
  fs::create_directories(dir / "served");
  server.server().set_mount_point("/", (dir / "served").string());
  const int port = server.start();
  const auto project =
      testing::write_toy_project(dir.path(), fmt::format("http://127.0.0.1:{}", port));
  const auto config_for = [&](const std::string& out) {
    const std::vector<std::string> overrides = {"pipeline.output=" + (dir / out).string()};
    return pipeline::load_pipeline_config(project.config, overrides);
  };

  const auto a = config_for("run-a");
  const auto b = config_for("run-b");
  const auto summary = pipeline::run_pipeline(a);
  pipeline::run_pipeline(b);
  expect(summary.monotone(), "stage counts are not monotone");
  expect(testing::snapshot_tree(pipeline::reports_dir(a)) ==
             testing::snapshot_tree(pipeline::reports_dir(b)),
         "reports differ between identical runs");

  const auto killed = config_for("run-killed");
  std::fflush(nullptr);
  const pid_t child = ::fork();
  if (child == 0) {
    pipeline::PipelineHooks hooks;
    hooks.on_step = [](std::string_view stage, std::string_view step) {
      if (stage == "dedup" && step == "clusters") ::_exit(137);
    };
    pipeline::run_pipeline(killed, hooks);
    ::_exit(0);
  }
  int status = 0;
  ::waitpid(child, &status, 0);
  expect(WIFEXITED(status) && WEXITSTATUS(status) == 137, "child was not killed in dedup");
  expect(!fs::exists(pipeline::reports_dir(killed) / "summary.csv"), "killed run wrote a summary");

  const auto resumed = pipeline::run_pipeline(killed);
  expect(
      std::find(resumed.resumed.begin(), resumed.resumed.end(), "filter") != resumed.resumed.end(),
      "rerun did not resume from checkpoints");
  expect(pipeline::summary_csv(resumed) == pipeline::summary_csv(summary),
         "resumed summary differs");
  expect(read_file_text(pipeline::reports_dir(killed) / "summary.csv") ==
             read_file_text(pipeline::reports_dir(a) / "summary.csv"),
         "resumed summary report differs");
}

// ---- 10 ----------------------------------------------------------------

void throughput_meter() {
  const auto start = Clock::now();
  std::vector<Bytes> images;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    images.push_back(image::encode_png(image::synthetic_image(20000 + seed, 64, 64)));
  }
  auto provider = embed::Provider::create(deterministic(64));
  for (const auto method : {dedup::Method::phash, dedup::Method::embedding}) {
    dedup::DedupConfig config;
    config.method = method;
    const auto samples = dedup::measure_throughput(config, images, 2, provider.get());
    expect(samples.size() == 2, "wrong number of samples");
    for (const auto& s : samples) {
      expect(s.images_processed == 500, "not every image was processed");
      expect(s.images_per_second == static_cast<double>(s.images_processed) / s.elapsed_seconds,
             "rate is not processed / elapsed");
      expect(std::isfinite(s.images_per_second) && s.images_per_second > 0.0,
             fmt::format("{} rate {}", dedup::to_string(method), s.images_per_second));
    }
  }
  const double elapsed = seconds_since(start);
  expect(elapsed < 60.0, fmt::format("took {:.2f}s", elapsed));
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void()>> criteria[] = {
      {"mean-similarity filter matches the brute-force oracle", mean_similarity_oracle},
      {"retention is monotone in rho", retention_monotonicity},
      {"bucket percentages reproduce the published table", bucket_arithmetic},
      {"threshold recommendation gives 54.5", threshold_recommendation},
      {"dedup clusters match the all-pairs oracle", dedup_oracle},
      {"perceptual hash known answers", phash_known_answers},
      {"QA verdict truth table", verdict_truth_table},
      {"contribution points ledger", points_ledger},
      {"pipeline determinism and resume", determinism_and_resume},
      {"throughput meter", throughput_meter},
  };
  int failed = 0;
  int number = 0;
  for (const auto& [name, check] : criteria) {
    ++number;
    const auto start = Clock::now();
    std::string reason;
    try {
      check();
    } catch (const Failure& f) {
      reason = f.reason;
    } catch (const std::exception& e) {
      reason = fmt::format("exception: {}", e.what());
    }
    const double elapsed = seconds_since(start);
    if (reason.empty()) {
      fmt::print("criterion {:>2} PASS ({:.2f}s) {}\n", number, elapsed, name);
    } else {
      ++failed;
      fmt::print("criterion {:>2} FAIL ({:.2f}s) {}: {}\n", number, elapsed, name, reason);
    }
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
