#include <doctest.h>

#include <cmath>

#include <fmt/format.h>

#include "curator/core/errors.hpp"
#include "curator/core/io.hpp"
#include "curator/pipeline/pipeline.hpp"
#include "curator/pipeline/stats.hpp"
#include "support.hpp"

using namespace curator;
using namespace curator::pipeline;
namespace fs = std::filesystem;

TEST_CASE("config sections, overrides and relative paths") {
  const std::string ini =
      "; comment\n[pipeline]\nseed = 11\noutput = run\n[filter]\nrho = 0.6\n"
      "reference = refs/r.bin\n[dedup]\nmethod = embedding\nepsilon = 0.97\n"
      "[stages]\ncalibrate = off\n";
  const std::vector<std::string> overrides = {"--filter.rho=0.7", "pipeline.workers=3"};
  const auto c = parse_pipeline_config(ini, overrides, "/base");
  CHECK(c.seed == 11);
  CHECK(c.rho == 0.7);
  CHECK(c.workers == 3);
  CHECK(c.output_dir == fs::path("/base/run"));
  CHECK(*c.reference == fs::path("/base/refs/r.bin"));
  CHECK(c.dedup.method == dedup::Method::embedding);
  CHECK(c.dedup.epsilon == 0.97);
  CHECK_FALSE(c.stages.calibrate);
  CHECK(c.stages.dedup);
}

TEST_CASE("config rejects unknown keys and malformed values") {
  CHECK_THROWS_AS(parse_pipeline_config("[filter]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("[nosuch]\nrho = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("rho = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("[filter]\nrho = high\n"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("[stages]\ndedup = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("[dedup]\nmethod = md5\n"), ConfigError);
  const std::vector<std::string> bad = {"filter.rho"};
  CHECK_THROWS_AS(parse_pipeline_config("", bad), ConfigError);
  const std::vector<std::string> unknown = {"filter.nope=1"};
  CHECK_THROWS_AS(parse_pipeline_config("", unknown), ConfigError);
}

TEST_CASE("every recognised key survives the canonical text round trip") {
  const auto keys = config_keys();
  CHECK(keys.size() > 20);
  PipelineConfig c = parse_pipeline_config("[filter]\nrho = 0.25\n[dedup]\nmax_hamming = 4\n");
  const auto text = canonical_config(c);
  for (const auto& key : keys) CHECK(text.find(key + "=") != std::string::npos);
  CHECK(canonical_config(parse_pipeline_config("[filter]\nrho = 0.25\n[dedup]\nmax_hamming=4")) ==
        text);
  CHECK(canonical_config(parse_pipeline_config("")) != text);
}

TEST_CASE("validation requires inputs of enabled stages") {
  testing::TempDir dir;
  auto c = parse_pipeline_config("", {}, dir.path());
  CHECK_THROWS_AS(c.validate(), ConfigError);  // no manifest
  c.stages = {false, false, false, false, false};
  CHECK_NOTHROW(c.validate());
  c.stages.filter = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);  // no reference
  c.reference = dir / "missing.bin";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.stages.filter = false;
  c.workers = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

namespace {

struct ToyRun {
  testing::TempDir dir;
  testing::LocalServer server;
  testing::ToyProject project;

  ToyRun() {
    fs::create_directories(dir / "served");
    REQUIRE(server.server().set_mount_point("/", (dir / "served").string()));
    const int port = server.start();
    project = testing::write_toy_project(dir.path(), fmt::format("http://127.0.0.1:{}", port));
  }

  PipelineConfig config(std::vector<std::string> overrides = {}) const {
    return load_pipeline_config(project.config, overrides);
  }
};

}  // namespace

TEST_CASE("toy run counts are consistent and reports are written") {
  ToyRun toy;
  const auto config = toy.config();
  const auto summary = run_pipeline(config);
  CHECK(summary.ingested == 20);
  CHECK(summary.fetched == 18);
  CHECK(summary.scored == 18);
  CHECK(summary.monotone());
  CHECK(summary.retained > 0);
  CHECK(summary.survivors == summary.clusters);
  CHECK(summary.resumed.empty());
  for (const char* name : {"summary.csv", "summary.txt", "fetch.csv", "fetch.txt", "retention.csv",
                           "clusters.csv", "calibration_sample.csv"}) {
    CHECK_MESSAGE(fs::exists(reports_dir(config) / name), name);
  }
  CHECK(read_file_text(reports_dir(config) / "summary.csv") == summary_csv(summary));
  const auto fetch = read_file_text(reports_dir(config) / "fetch.csv");
  CHECK(fetch.find("web14,") != std::string::npos);
  CHECK(fetch.find("web15,") != std::string::npos);
}

TEST_CASE("a completed run resumes every stage and reproduces its reports") {
  ToyRun toy;
  const auto config = toy.config();
  const auto first = run_pipeline(config);
  const auto reports = testing::snapshot_tree(reports_dir(config));
  const auto second = run_pipeline(config);
  CHECK(second.executed == std::vector<std::string>{"reports"});
  CHECK(second.resumed.size() == 6);
  CHECK(summary_csv(second) == summary_csv(first));
  CHECK(testing::snapshot_tree(reports_dir(config)) == reports);
}

TEST_CASE("two fresh runs with the same seed give byte-identical reports") {
  ToyRun toy;
  const auto a = toy.config({"pipeline.output=" + (toy.dir / "a").string()});
  const auto b = toy.config({"pipeline.output=" + (toy.dir / "b").string()});
  run_pipeline(a);
  run_pipeline(b);
  CHECK(testing::snapshot_tree(reports_dir(a)) == testing::snapshot_tree(reports_dir(b)));
}

TEST_CASE("changing the configuration invalidates checkpoints") {
  ToyRun toy;
  run_pipeline(toy.config());
  const auto rerun = run_pipeline(toy.config({"filter.rho=0.05"}));
  CHECK(rerun.resumed.empty());
}

TEST_CASE("disabled dedup keeps every retained image") {
  ToyRun toy;
  const auto summary = run_pipeline(toy.config({"stages.dedup=false"}));
  CHECK(summary.survivors == summary.retained);
  CHECK(summary.monotone());
}

TEST_CASE("a failure inside dedup keeps earlier checkpoints and the rerun resumes") {
  ToyRun toy;
  const auto reference =
      run_pipeline(toy.config({"pipeline.output=" + (toy.dir / "ref").string()}));

  const auto config = toy.config();
  PipelineHooks hooks;
  hooks.on_step = [](std::string_view stage, std::string_view step) {
    if (stage == "dedup" && step == "clusters") throw std::runtime_error("killed");
  };
  CHECK_THROWS_AS(run_pipeline(config, hooks), StageError);
  CHECK_FALSE(fs::exists(reports_dir(config) / "summary.csv"));

  const auto resumed = run_pipeline(config);
  CHECK(resumed.resumed == std::vector<std::string>{"ingest", "embed", "filter", "calibrate"});
  CHECK(summary_csv(resumed) == summary_csv(reference));
}

TEST_CASE("calibration ratings produce a relevance report") {
  ToyRun toy;
  const auto first = run_pipeline(toy.config({"stages.dedup=false"}));
  const auto sample = read_file_text(reports_dir(toy.config()) / "calibration_sample.csv");
  // Rate every sampled item relevant.
  std::string ratings;
  std::size_t line_start = sample.find('\n') + 1;
  while (line_start < sample.size()) {
    const auto comma = sample.find(',', line_start);
    const auto id = sample.substr(line_start, comma - line_start);
    ratings += fmt::format(
        R"({{"rater_id":"r","item_id":"{}","task":"bucket_relevance","value":"yes","timestamp":1}})",
        id);
    ratings += "\n";
    line_start = sample.find('\n', line_start) + 1;
    if (line_start == 0) break;
  }
  write_file_atomic(toy.dir / "ratings.jsonl", ratings);
  const auto config = toy.config(
      {"stages.dedup=false", "calibrate.ratings=" + (toy.dir / "ratings.jsonl").string()});
  run_pipeline(config);
  CHECK(fs::exists(reports_dir(config) / "relevance.csv"));
  CHECK(first.monotone());
}

TEST_CASE("dataset statistics of accepted images") {
  Corpus corpus(2);
  corpus[0].id = "a";
  corpus[0].regions = {Region::ID};
  corpus[1].id = "b";
  corpus[1].regions = {Region::VN, Region::TH};

  std::vector<qa::ValidationVote> votes = {{"v1", "a", true, 4, qa::CaptionFit::yes, false},
                                           {"v2", "a", true, 5, qa::CaptionFit::yes, false}};
  auto verdicts = qa::aggregate_all(votes);
  auto stats = dataset_stats(corpus, verdicts);
  CHECK(stats.accepted == 1);
  CHECK(stats.mean_relevance == 4.5);
  CHECK(stats.median_relevance == 4.5);
  CHECK(stats.std_relevance == 0.0);
  CHECK(stats.validators_per_image == 2.0);
  REQUIRE(stats.regions.size() == 11);
  for (const auto& r : stats.regions) {
    if (r.region == Region::ID) {
      CHECK(r.accepted == 1);
      CHECK(*r.mean_relevance == 4.5);
    } else {
      CHECK(r.accepted == 0);
      CHECK_FALSE(r.mean_relevance.has_value());
    }
  }

  votes.push_back({"v1", "b", true, 2, qa::CaptionFit::yes, false});
  votes.push_back({"v2", "b", true, 4, qa::CaptionFit::yes, false});
  votes.push_back({"v1", "c", false, 1, qa::CaptionFit::no, false});
  verdicts = qa::aggregate_all(votes);
  stats = dataset_stats(corpus, verdicts);
  CHECK(stats.accepted == 2);
  CHECK(stats.mean_relevance == 3.75);
  CHECK(stats.median_relevance == 3.75);
  CHECK(stats.std_relevance == doctest::Approx(1.5 / std::sqrt(2.0)));
  CHECK(dataset_stats_csv(stats).find("Vietnam") != std::string::npos);

  const auto empty = dataset_stats({}, {});
  CHECK(empty.accepted == 0);
  CHECK(empty.mean_relevance == 0.0);
  CHECK(empty.median_relevance == 0.0);
  CHECK(empty.std_relevance == 0.0);
  CHECK(render_dataset_stats(empty).find("Relevance avg.       ") != std::string::npos);
}
