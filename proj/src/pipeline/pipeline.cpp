#include "curator/pipeline/pipeline.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "curator/calibration/calibration.hpp"
#include "curator/core/corpus_io.hpp"
#include "curator/core/errors.hpp"
#include "curator/core/io.hpp"

namespace curator::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Layout {
  fs::path root;

  fs::path ingested() const { return root / "ingested"; }
  fs::path embedded() const { return root / "embed"; }
  fs::path scored() const { return root / "scored"; }
  fs::path calibration() const { return root / "calibration"; }
  fs::path dedup() const { return root / "dedup"; }
  fs::path survivors() const { return root / "survivors"; }
  fs::path reports() const { return root / "reports"; }
  fs::path checkpoints() const { return root / "checkpoints"; }
};

// One JSON file per completed stage, tagged with the configuration digest.
class Checkpoints {
 public:
  Checkpoints(fs::path dir, std::string fingerprint)
      : dir_(std::move(dir)), fingerprint_(std::move(fingerprint)) {
    fs::create_directories(dir_);
    // Checkpoints written under a different configuration are stale.
    bool stale = false;
    for (const auto& entry : fs::directory_iterator(dir_)) {
      if (entry.path().extension() != ".json") continue;
      try {
        const json cp = json::parse(read_file_text(entry.path()));
        stale = stale || cp.value("fingerprint", "") != fingerprint_;
      } catch (const std::exception&) {
        stale = true;
      }
    }
    if (stale) clear();
  }

  std::optional<json> load(std::string_view stage) const {
    const auto path = file(stage);
    if (!fs::exists(path)) return std::nullopt;
    try {
      json cp = json::parse(read_file_text(path));
      if (cp.value("fingerprint", "") != fingerprint_) return std::nullopt;
      return cp.at("counts");
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  // Records a completed stage and invalidates everything downstream of it.
  void mark(std::string_view stage, json counts) {
    bool downstream = false;
    for (const auto name : kStageOrder) {
      if (downstream) fs::remove(file(name));
      if (name == stage) downstream = true;
    }
    json cp{{"stage", stage}, {"fingerprint", fingerprint_}, {"counts", std::move(counts)}};
    write_file_atomic(file(stage), cp.dump(2) + "\n");
  }

 private:
  fs::path file(std::string_view stage) const { return dir_ / (std::string(stage) + ".json"); }
  void clear() {
    for (const auto name : kStageOrder) fs::remove(file(name));
  }

  fs::path dir_;
  std::string fingerprint_;
};

json fetch_report_json(const ingest::FetchReport& report) {
  json out;
  out["attempted"] = report.attempted;
  out["succeeded"] = report.succeeded;
  json causes = json::object();
  for (const auto cause : ingest::kAllFetchFailures) {
    causes[std::string(ingest::to_string(cause))] = report.failed(cause);
  }
  out["failed_by_cause"] = std::move(causes);
  json failures = json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"id", f.id}, {"cause", ingest::to_string(f.cause)}, {"detail", f.detail}});
  }
  out["failures"] = std::move(failures);
  return out;
}

ingest::FetchReport fetch_report_from_json(const json& in) {
  ingest::FetchReport report;
  report.attempted = in.at("attempted").get<std::size_t>();
  report.succeeded = in.at("succeeded").get<std::size_t>();
  for (const auto cause : ingest::kAllFetchFailures) {
    report.failed_by_cause[static_cast<std::size_t>(cause)] =
        in.at("failed_by_cause").at(std::string(ingest::to_string(cause))).get<std::size_t>();
  }
  for (const auto& f : in.at("failures")) {
    const auto cause_text = f.at("cause").get<std::string>();
    ingest::FetchFailure cause = ingest::FetchFailure::http_error;
    for (const auto c : ingest::kAllFetchFailures) {
      if (ingest::to_string(c) == cause_text) cause = c;
    }
    report.failures.push_back(
        {f.at("id").get<std::string>(), cause, f.at("detail").get<std::string>()});
  }
  return report;
}

Corpus fetched_only(const Corpus& corpus) {
  Corpus out;
  for (const auto& record : corpus) {
    if (record.local_path) out.push_back(record);
  }
  return out;
}

std::vector<dedup::DuplicateCluster> singleton_clusters(const Corpus& corpus) {
  std::vector<std::string> ids;
  for (const auto& record : corpus) ids.push_back(record.id);
  std::sort(ids.begin(), ids.end());
  std::vector<dedup::DuplicateCluster> clusters;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    clusters.push_back(dedup::DuplicateCluster{fmt::format("c{:06d}", i), {ids[i]}, ids[i]});
  }
  return clusters;
}

std::string sample_csv(const calibration::Sample& sample) {
  std::string out = "bucket,item_id,score,population,short_sampled\n";
  for (const auto& bucket : sample.buckets) {
    for (const auto& item : bucket.items) {
      out += fmt::format("{},{},{},{},{}\n", to_string(bucket.bucket), item.id, item.score,
                         bucket.population, bucket.short_sampled ? "true" : "false");
    }
  }
  return out;
}

class Run {
 public:
  Run(const PipelineConfig& config, const PipelineHooks& hooks)
      : config_(config),
        hooks_(hooks),
        layout_{config.output_dir},
        checkpoints_(layout_.checkpoints(), sha256_hex(as_bytes(canonical_config(config)))) {}

  RunSummary execute() {
    stage("ingest", [&] { return ingest(); }, [&](const json& c) { restore_ingest(c); });
    if (config_.stages.embed) {
      stage("embed", [&] { return embed(); }, [](const json&) {});
    }
    if (config_.stages.filter) {
      stage("filter", [&] { return filter(); }, [&](const json&) { restore_filter(); });
    } else {
      retained_ = fetched_;
    }
    summary_.retained = retained_.size();
    if (config_.stages.calibrate && config_.stages.filter) {
      stage("calibrate", [&] { return calibrate(); }, [](const json&) {});
    }
    if (config_.stages.dedup) {
      stage("dedup", [&] { return run_dedup(); }, [&](const json&) { restore_dedup(); });
    } else {
      clusters_ = singleton_clusters(retained_);
    }
    summary_.clusters = clusters_.size();
    stage(
        "survivors", [&] { return survivors(); },
        [&](const json& c) { summary_.survivors = c.at("survivors").get<std::size_t>(); });
    run_step("reports", [&] { reports(); });
    summary_.executed.push_back("reports");
    return summary_;
  }

 private:
  template <typename Fn>
  void run_step(std::string_view name, Fn&& fn) {
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(fmt::format("stage {} failed: {}", name, e.what()));
    }
  }

  template <typename Compute, typename Restore>
  void stage(std::string_view name, Compute&& compute, Restore&& restore) {
    if (const auto counts = checkpoints_.load(name)) {
      run_step(name, [&] { restore(*counts); });
      summary_.resumed.emplace_back(name);
      return;
    }
    json counts;
    run_step(name, [&] { counts = compute(); });
    checkpoints_.mark(name, std::move(counts));
    summary_.executed.emplace_back(name);
  }

  void step(std::string_view stage_name, std::string_view step_name) {
    if (hooks_.on_step) hooks_.on_step(stage_name, step_name);
  }

  embed::Provider& provider() {
    if (!provider_) provider_ = embed::Provider::create(config_.provider);
    return *provider_;
  }

  json ingest() {
    if (!config_.stages.ingest) {
      throw StageError("ingest is disabled and no ingested corpus checkpoint exists");
    }
    Corpus corpus;
    std::set<std::string> ids;
    std::size_t duplicates = 0;
    auto add = [&](Corpus records) {
      for (auto& record : records) {
        if (!ids.insert(record.id).second) {
          ++duplicates;
          continue;
        }
        corpus.push_back(std::move(record));
      }
    };
    if (config_.manifest) add(ingest::load_manifest(*config_.manifest).records);
    if (config_.crowdsource) add(ingest::import_crowdsource(*config_.crowdsource).records);
    std::sort(corpus.begin(), corpus.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });

    auto options = config_.fetch;
    options.image_dir = corpus_image_dir(layout_.ingested());
    const auto report = ingest::fetch_images(corpus, options);
    write_corpus(layout_.ingested(), corpus);
    write_file_atomic(layout_.ingested() / "fetch_report.json",
                      fetch_report_json(report).dump(2) + "\n");

    ingested_ = std::move(corpus);
    fetched_ = fetched_only(ingested_);
    fetch_report_ = report;
    summary_.ingested = ingested_.size();
    summary_.fetched = fetched_.size();
    return json{{"ingested", summary_.ingested},
                {"fetched", summary_.fetched},
                {"duplicate_ids", duplicates}};
  }

  void restore_ingest(const json&) {
    ingested_ = read_corpus(layout_.ingested());
    fetched_ = fetched_only(ingested_);
    fetch_report_ = fetch_report_from_json(
        json::parse(read_file_text(layout_.ingested() / "fetch_report.json")));
    summary_.ingested = ingested_.size();
    summary_.fetched = fetched_.size();
  }

  json embed() {
    std::vector<Bytes> bytes;
    std::vector<ByteView> views;
    std::string failures = "id,reason\n";
    std::vector<std::string> ids;
    std::size_t unreadable = 0;
    for (const auto& record : fetched_) {
      try {
        bytes.push_back(read_file_bytes(*record.local_path));
        ids.push_back(record.id);
      } catch (const IoError& e) {
        ++unreadable;
        failures += fmt::format("{},{}\n", record.id, e.what());
      }
    }
    for (const auto& b : bytes) views.emplace_back(b);
    const auto results = provider().encode_batch(views);
    std::size_t embedded = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].ok()) {
        ++embedded;
      } else {
        failures += fmt::format("{},{}\n", ids[i], results[i].error);
      }
    }
    write_file_atomic(layout_.embedded() / "failures.csv", failures);
    return json{{"embedded", embedded}, {"failed", results.size() - embedded + unreadable}};
  }

  json filter() {
    filter::FilterConfig filter_config;
    filter_config.rho = config_.rho;
    filter_config.prefilter_floor = config_.prefilter_floor;
    filter_config.reference = filter::read_reference_file(*config_.reference);
    scored_ = filter::filter_corpus(fetched_, provider(), filter_config, config_.workers);
    filter::write_scored_corpus(layout_.scored(), *scored_);
    retained_ = scored_->retained_records();
    summary_.scored = scored_->scored_count();
    return json{{"scored", summary_.scored}, {"retained", retained_.size()}};
  }

  void restore_filter() {
    scored_ = filter::read_scored_corpus(layout_.scored());
    retained_ = scored_->retained_records();
    summary_.scored = scored_->scored_count();
  }

  json calibrate() {
    const auto sample = calibration::stratified_sample(*scored_, config_.per_bucket, config_.seed);
    write_file_atomic(layout_.calibration() / "sample.csv", sample_csv(sample));
    json counts{{"sampled", sample.size()}};
    if (config_.ratings) {
      const auto ratings = calibration::read_ratings(*config_.ratings);
      const auto report = calibration::bucket_relevance(ratings, sample);
      std::optional<calibration::ThresholdRecommendation> recommendation;
      if (!report.stats.empty()) {
        recommendation =
            calibration::recommend_threshold(report.stats, config_.target_relevance_pct);
        counts["recommended_boundary"] = recommendation->boundary;
      }
      write_file_atomic(layout_.calibration() / "relevance.csv",
                        calibration::relevance_csv(report));
      write_file_atomic(layout_.calibration() / "relevance.txt",
                        calibration::render_relevance(report, recommendation));
    }
    return counts;
  }

  json run_dedup() {
    std::vector<std::string> errors;
    embed::Provider* p = config_.dedup.method == dedup::Method::embedding ? &provider() : nullptr;
    const auto items =
        dedup::extract_features(retained_, config_.dedup, p, config_.workers, &errors);
    step("dedup", "features");
    if (config_.dedup.method == dedup::Method::phash) {
      dedup::write_hash_sidecar(layout_.dedup() / "hashes.csv", items);
    }
    dedup::ScanOptions options;
    options.workers = config_.workers;
    const auto result = dedup::dedup_corpus(items, config_.dedup, options);
    step("dedup", "clusters");
    clusters_ = result.clusters;
    std::string error_text;
    for (const auto& e : errors) error_text += e + "\n";
    write_file_atomic(layout_.dedup() / "feature_errors.txt", error_text);
    write_file_atomic(layout_.dedup() / "clusters.csv", dedup::cluster_report_csv(clusters_));
    return json{{"clusters", clusters_.size()}, {"flagged", result.flagged.size()}};
  }

  void restore_dedup() {
    clusters_ = dedup::parse_cluster_report_csv(read_file_text(layout_.dedup() / "clusters.csv"));
  }

  json survivors() {
    const Corpus kept = dedup::survivors(clusters_, retained_);
    write_corpus(layout_.survivors(), kept);
    summary_.survivors = kept.size();
    return json{{"survivors", kept.size()}};
  }

  void write_report(const std::string& stem, const std::string& csv, const std::string& text) {
    if (config_.report_csv) write_file_atomic(layout_.reports() / (stem + ".csv"), csv);
    if (config_.report_text) write_file_atomic(layout_.reports() / (stem + ".txt"), text);
  }

  void reports() {
    fs::create_directories(layout_.reports());
    write_report("summary", summary_csv(summary_), render_summary(summary_));

    std::string failures = "id,cause,detail\n";
    for (const auto& f : fetch_report_.failures) {
      std::string detail = f.detail;
      std::replace(detail.begin(), detail.end(), ',', ';');
      std::replace(detail.begin(), detail.end(), '\n', ' ');
      failures += fmt::format("{},{},{}\n", f.id, ingest::to_string(f.cause), detail);
    }
    write_report("fetch", failures, ingest::render_fetch_report(fetch_report_));

    if (scored_) {
      const std::size_t total = scored_->scored_count() + scored_->unscored.size();
      const auto table = filter::threshold_sweep(*scored_, total);
      write_report("retention", filter::retention_csv(table), filter::render_retention(table));
    }
    if (config_.stages.calibrate && scored_) {
      const auto sample_file = layout_.calibration() / "sample.csv";
      if (fs::exists(sample_file)) {
        write_file_atomic(layout_.reports() / "calibration_sample.csv",
                          read_file_text(sample_file));
      }
      for (const char* name : {"relevance.csv", "relevance.txt"}) {
        const auto file = layout_.calibration() / name;
        if (fs::exists(file)) {
          write_file_atomic(layout_.reports() / name, read_file_text(file));
        }
      }
    }
    std::string cluster_text = fmt::format("clusters: {}\n", clusters_.size());
    std::size_t multi = 0;
    for (const auto& c : clusters_) multi += c.member_ids.size() > 1 ? 1 : 0;
    cluster_text += fmt::format("clusters with duplicates: {}\n", multi);
    write_report("clusters", dedup::cluster_report_csv(clusters_), cluster_text);
  }

  const PipelineConfig& config_;
  const PipelineHooks& hooks_;
  Layout layout_;
  Checkpoints checkpoints_;
  std::unique_ptr<embed::Provider> provider_;

  Corpus ingested_;
  Corpus fetched_;
  Corpus retained_;
  ingest::FetchReport fetch_report_;
  std::optional<filter::ScoredCorpus> scored_;
  std::vector<dedup::DuplicateCluster> clusters_;
  RunSummary summary_;
};

}  // namespace

bool RunSummary::monotone() const {
  return survivors <= retained && retained <= fetched && fetched <= ingested;
}

std::string summary_csv(const RunSummary& s) {
  return fmt::format(
      "stage,count\ningested,{}\nfetched,{}\nscored,{}\nretained,{}\nclusters,{}\nsurvivors,{}\n",
      s.ingested, s.fetched, s.scored, s.retained, s.clusters, s.survivors);
}

std::string render_summary(const RunSummary& s) {
  std::string out;
  const std::pair<const char*, std::size_t> rows[] = {
      {"ingested", s.ingested}, {"fetched", s.fetched},   {"scored", s.scored},
      {"retained", s.retained}, {"clusters", s.clusters}, {"survivors", s.survivors}};
  for (const auto& [name, count] : rows) out += fmt::format("{:<10} {:>12}\n", name, count);
  return out;
}

fs::path reports_dir(const PipelineConfig& config) {
  return Layout{config.output_dir}.reports();
}

fs::path checkpoints_dir(const PipelineConfig& config) {
  return Layout{config.output_dir}.checkpoints();
}

RunSummary run_pipeline(const PipelineConfig& config, const PipelineHooks& hooks) {
  config.validate();
  fs::create_directories(config.output_dir);
  Run run(config, hooks);
  return run.execute();
}

}  // namespace curator::pipeline
