// curator: command-line front end for the image curation pipeline.
//
//   curator ingest    --manifest urls.jsonl --out corpus/
//   curator embed     --corpus corpus/ [--reference-out ref.bin]
//   curator filter    --corpus corpus/ --reference ref.bin --out scored/
//   curator calibrate --scored scored/ --serve :8080 --per-bucket 50 --seed 7
//   curator dedup     --corpus corpus/ --method phash --out dedup/
//   curator bench     --synthetic 500 --method both
//   curator qa        --votes votes.jsonl --report verdicts.csv
//   curator points    --ledger ledger.jsonl --authors
//   curator stats     --corpus corpus/ --votes votes.jsonl
//   curator run       --config pipeline.ini [--section.key=value ...]

#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>

#include <fmt/format.h>
#include <CLI11.hpp>

#include "curator/calibration/calibration.hpp"
#include "curator/calibration/review_server.hpp"
#include "curator/core/corpus_io.hpp"
#include "curator/core/errors.hpp"
#include "curator/core/io.hpp"
#include "curator/dedup/dedup.hpp"
#include "curator/filter/filter.hpp"
#include "curator/image/synthetic.hpp"
#include "curator/ingest/ingest.hpp"
#include "curator/pipeline/pipeline.hpp"
#include "curator/pipeline/stats.hpp"
#include "curator/qa/qa.hpp"

namespace fs = std::filesystem;
using namespace curator;

namespace {

struct ProviderFlags {
  std::string backend = "deterministic";
  std::string endpoint;
  std::size_t dims = 512;
  std::string cache_dir;
  std::size_t batch_size = 32;
  double timeout = 60.0;

  void attach(CLI::App& app) {
    app.add_option("--backend", backend, "remote or deterministic")->capture_default_str();
    app.add_option("--endpoint", endpoint, "inference service base URL (remote backend)");
    app.add_option("--dims", dims, "embedding dimensionality")->capture_default_str();
    app.add_option("--cache", cache_dir, "embedding cache directory");
    app.add_option("--batch-size", batch_size)->capture_default_str();
    app.add_option("--request-timeout", timeout, "seconds")->capture_default_str();
  }

  embed::ProviderConfig config() const {
    embed::ProviderConfig out;
    const auto kind = embed::parse_backend_kind(backend);
    if (!kind) throw ConfigError(fmt::format("unknown backend '{}'", backend));
    out.backend = *kind;
    if (!endpoint.empty()) out.endpoint = endpoint;
    out.dims = dims;
    out.cache_dir = cache_dir;
    out.batch_size = batch_size;
    out.request_timeout_seconds = timeout;
    out.validate();
    return out;
  }
};

// Writes `text` to `path`, or to stdout when the path is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(path, text);
  }
}

std::vector<Bytes> read_images(const Corpus& corpus, std::vector<std::string>* ids = nullptr) {
  std::vector<Bytes> out;
  for (const auto& record : corpus) {
    if (!record.local_path) continue;
    try {
      out.push_back(read_file_bytes(*record.local_path));
      if (ids) ids->push_back(record.id);
    } catch (const IoError& e) {
      std::cerr << "skipping " << record.id << ": " << e.what() << "\n";
    }
  }
  return out;
}

std::pair<std::string, int> parse_listen(const std::string& spec) {
  const auto colon = spec.rfind(':');
  std::string host = colon == std::string::npos ? spec : spec.substr(0, colon);
  const std::string port = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  try {
    return {host, port.empty() ? 8080 : std::stoi(port)};
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("cannot parse listen address '{}'", spec));
  }
}

// ---- ingest ----------------------------------------------------------------

struct IngestFlags {
  std::string manifest;
  std::string crowdsource;
  std::string out;
  std::size_t parallelism = 8;
  double timeout = 30.0;
  std::size_t max_bytes = 20u << 20;
  bool no_fetch = false;
  std::string report;
};

int run_ingest(const IngestFlags& f) {
  if (f.manifest.empty() && f.crowdsource.empty()) {
    throw ConfigError("give --manifest and/or --crowdsource");
  }
  Corpus corpus;
  if (!f.manifest.empty()) {
    auto load = ingest::load_manifest(f.manifest);
    for (const auto& d : load.diagnostics) std::cerr << d << "\n";
    std::cerr << fmt::format("manifest: {} records, {} skipped\n", load.records.size(),
                             load.skipped);
    corpus = std::move(load.records);
  }
  if (!f.crowdsource.empty()) {
    auto import = ingest::import_crowdsource(f.crowdsource);
    for (const auto& r : import.rejected) {
      std::cerr << fmt::format("crowdsource line {} ({}): {}\n", r.line, r.id, r.reason);
    }
    for (auto& record : import.records) corpus.push_back(std::move(record));
  }
  if (!f.no_fetch) {
    ingest::FetchOptions options;
    options.parallelism = f.parallelism;
    options.timeout_seconds = f.timeout;
    options.max_bytes = f.max_bytes;
    options.image_dir = corpus_image_dir(f.out);
    const auto report = ingest::fetch_images(corpus, options);
    std::cout << ingest::render_fetch_report(report);
    std::cout << fmt::format("elapsed    {:>15.2f}s\n", report.elapsed_seconds);
    if (!f.report.empty()) {
      std::string csv = "id,cause,detail\n";
      for (const auto& failure : report.failures) {
        csv += fmt::format("{},{},\"{}\"\n", failure.id, ingest::to_string(failure.cause),
                           failure.detail);
      }
      write_file_atomic(f.report, csv);
    }
  }
  write_corpus(f.out, corpus);
  return 0;
}

// ---- embed -----------------------------------------------------------------

struct EmbedFlags {
  std::string corpus;
  ProviderFlags provider;
  std::string reference_out;
  std::string provenance;
};

int run_embed(const EmbedFlags& f) {
  const Corpus corpus = read_corpus(f.corpus);
  auto provider = embed::Provider::create(f.provider.config());
  std::vector<std::string> ids;
  const auto images = read_images(corpus, &ids);
  std::vector<ByteView> views(images.begin(), images.end());
  const auto results = provider->encode_batch(views);
  ReferenceSet reference;
  reference.provenance = f.provenance.empty() ? f.corpus : f.provenance;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].ok()) {
      reference.embeddings.push_back(*results[i].vector);
    } else {
      ++failed;
      std::cerr << ids[i] << ": " << results[i].error << "\n";
    }
  }
  std::cout << fmt::format("embedded {} of {} images with {} ({} backend calls)\n",
                           reference.embeddings.size(), results.size(), provider->backend_id(),
                           provider->backend_calls());
  if (!f.reference_out.empty()) {
    filter::write_reference_file(f.reference_out, reference);
    std::cout << fmt::format("wrote {} reference vectors to {}\n", reference.embeddings.size(),
                             f.reference_out);
  }
  return failed == 0 ? 0 : 1;
}

// ---- filter ----------------------------------------------------------------

struct FilterFlags {
  std::string corpus;
  std::string reference;
  std::string out;
  double rho = 0.545;
  double floor = 0.515;
  std::size_t workers = 1;
  std::size_t total = 0;
  std::string csv;
  ProviderFlags provider;
};

int run_filter(const FilterFlags& f) {
  const Corpus corpus = read_corpus(f.corpus);
  filter::FilterConfig config;
  config.rho = f.rho;
  config.prefilter_floor = f.floor;
  config.reference = filter::read_reference_file(f.reference);
  auto provider = embed::Provider::create(f.provider.config());
  const auto scored = filter::filter_corpus(corpus, *provider, config, f.workers);
  filter::write_scored_corpus(f.out, scored);
  const std::size_t total = f.total > 0 ? f.total : scored.scored_count() + scored.unscored.size();
  const auto table = filter::threshold_sweep(scored, total);
  std::cout << filter::render_retention(table);
  std::cout << fmt::format("retained {} at rho = {}; {} unscored\n", scored.retained_ids().size(),
                           scored.rho, scored.unscored.size());
  if (!f.csv.empty()) write_file_atomic(f.csv, filter::retention_csv(table));
  return 0;
}

// ---- calibrate -------------------------------------------------------------

struct CalibrateFlags {
  std::string scored;
  std::size_t per_bucket = 50;
  std::uint64_t seed = 0;
  double target = 85.0;
  std::string ratings;
  std::string serve;
  std::string static_dir;
  std::string pairs_corpus;
  std::string pairs_method = "phash";
  std::size_t pairs = 50;
  double epsilon = 0.95;
  int max_hamming = 16;
  std::string sample_out;
};

volatile std::sig_atomic_t g_stop = 0;

int run_calibrate(const CalibrateFlags& f) {
  const auto scored = filter::read_scored_corpus(f.scored);
  const auto sample = calibration::stratified_sample(scored, f.per_bucket, f.seed);
  for (const auto& bucket : sample.buckets) {
    std::cerr << fmt::format("{:<9} population {:>8}, sampled {:>4}{}\n", to_string(bucket.bucket),
                             bucket.population, bucket.items.size(),
                             bucket.short_sampled ? " (short)" : "");
  }
  if (!f.sample_out.empty()) {
    std::string csv = "bucket,item_id,score\n";
    for (const auto& bucket : sample.buckets) {
      for (const auto& item : bucket.items) {
        csv += fmt::format("{},{},{}\n", to_string(bucket.bucket), item.id, item.score);
      }
    }
    write_file_atomic(f.sample_out, csv);
  }

  auto catalog = calibration::make_catalog(sample);
  if (!f.pairs_corpus.empty()) {
    const Corpus corpus = read_corpus(f.pairs_corpus);
    dedup::DedupConfig config;
    const auto method = dedup::parse_method(f.pairs_method);
    if (!method) throw ConfigError("--pairs-method must be phash or embedding");
    config.method = *method;
    config.epsilon = f.epsilon;
    config.max_hamming = f.max_hamming;
    std::unique_ptr<embed::Provider> provider;
    if (config.method == dedup::Method::embedding) {
      provider = embed::Provider::create(embed::ProviderConfig{});
    }
    const auto items = dedup::extract_features(corpus, config, provider.get());
    const auto pairs = calibration::sample_top_pairs(dedup::duplicate_pairs(items, config),
                                                     config.method, f.pairs);
    calibration::add_pairs(catalog, pairs, corpus);
  }

  if (f.serve.empty()) {
    if (f.ratings.empty()) return 0;
    const auto ratings = calibration::read_ratings(f.ratings);
    const auto report = calibration::bucket_relevance(ratings, sample);
    std::optional<calibration::ThresholdRecommendation> recommendation;
    if (!report.stats.empty()) {
      recommendation = calibration::recommend_threshold(report.stats, f.target);
    }
    std::cout << calibration::render_relevance(report, recommendation);
    return 0;
  }

  calibration::RatingLog log(f.ratings.empty() ? fs::path("ratings.jsonl") : fs::path(f.ratings));
  calibration::ReviewServerOptions options;
  std::tie(options.host, options.port) = parse_listen(f.serve);
  options.target_relevance_pct = f.target;
  if (!f.static_dir.empty()) options.static_dir = f.static_dir;
  calibration::ReviewServer server(std::move(catalog), log, options);
  const int port = server.start();
  std::cerr << fmt::format("review API on http://{}:{}/ ({} sampled items, {} ratings loaded)\n",
                           options.host, port, sample.size(), log.size());
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  return 0;
}

// ---- dedup -----------------------------------------------------------------

struct DedupFlags {
  std::string corpus;
  std::string method = "phash";
  double epsilon = 0.95;
  int max_hamming = 16;
  std::string out;
  std::size_t workers = 1;
  std::string scan = "auto";
  ProviderFlags provider;
};

int run_dedup(const DedupFlags& f) {
  const Corpus corpus = read_corpus(f.corpus);
  dedup::DedupConfig config;
  const auto method = dedup::parse_method(f.method);
  if (!method) throw ConfigError("--method must be phash or embedding");
  config.method = *method;
  config.epsilon = f.epsilon;
  config.max_hamming = f.max_hamming;
  config.validate();
  std::unique_ptr<embed::Provider> provider;
  if (config.method == dedup::Method::embedding) {
    provider = embed::Provider::create(f.provider.config());
  }
  std::vector<std::string> errors;
  const auto items = dedup::extract_features(corpus, config, provider.get(), f.workers, &errors);
  for (const auto& e : errors) std::cerr << e << "\n";

  dedup::ScanOptions options;
  options.workers = f.workers;
  if (f.scan == "exhaustive") {
    options.strategy = dedup::ScanStrategy::exhaustive;
  } else if (f.scan == "blocked") {
    options.strategy = dedup::ScanStrategy::blocked;
  } else if (f.scan != "auto") {
    throw ConfigError("--scan must be auto, exhaustive or blocked");
  }
  const auto result = dedup::dedup_corpus(items, config, options);
  const Corpus kept = dedup::survivors(result.clusters, corpus);
  fs::create_directories(f.out);
  write_file_atomic(fs::path(f.out) / "clusters.csv", dedup::cluster_report_csv(result.clusters));
  if (config.method == dedup::Method::phash) {
    dedup::write_hash_sidecar(fs::path(f.out) / "hashes.csv", items);
  }
  write_corpus(fs::path(f.out) / "survivors", kept);
  std::cout << fmt::format("{} images, {} clusters, {} survivors, {} without features\n",
                           corpus.size(), result.clusters.size(), kept.size(),
                           result.flagged.size());
  return 0;
}

// ---- bench -----------------------------------------------------------------

struct BenchFlags {
  std::string corpus;
  std::size_t synthetic = 0;
  std::string method = "both";
  std::size_t repetitions = 3;
  std::string csv;
  ProviderFlags provider;
};

int run_bench(const BenchFlags& f) {
  std::vector<Bytes> images;
  if (!f.corpus.empty()) {
    images = read_images(read_corpus(f.corpus));
  } else {
    for (std::size_t i = 0; i < f.synthetic; ++i) {
      images.push_back(image::encode_png(image::synthetic_image(i, 64, 64)));
    }
  }
  std::vector<dedup::Method> methods;
  if (f.method == "both" || f.method == "phash") methods.push_back(dedup::Method::phash);
  if (f.method == "both" || f.method == "embedding") methods.push_back(dedup::Method::embedding);
  if (methods.empty()) throw ConfigError("--method must be phash, embedding or both");

  std::vector<dedup::ThroughputSample> samples;
  for (const auto method : methods) {
    dedup::DedupConfig config;
    config.method = method;
    std::unique_ptr<embed::Provider> provider;
    if (method == dedup::Method::embedding) provider = embed::Provider::create(f.provider.config());
    const auto run = dedup::measure_throughput(config, images, f.repetitions, provider.get());
    samples.insert(samples.end(), run.begin(), run.end());
  }
  std::cout << dedup::render_throughput(samples);
  if (!f.csv.empty()) {
    std::string csv = "method,images,elapsed_seconds,images_per_second\n";
    for (const auto& s : samples) {
      csv += fmt::format("{},{},{},{}\n", dedup::to_string(s.method), s.images_processed,
                         s.elapsed_seconds, s.images_per_second);
    }
    write_file_atomic(f.csv, csv);
  }
  return 0;
}

// ---- qa / points / stats ---------------------------------------------------

struct QaFlags {
  std::string votes;
  std::string report;
  std::string text;
  std::string escalations;
  std::string redaction;
};

int run_qa(const QaFlags& f) {
  const auto votes = qa::read_votes(f.votes);
  const auto verdicts = qa::aggregate_all(votes);
  if (!f.report.empty()) write_file_atomic(f.report, qa::verdicts_csv(verdicts));
  emit(f.text, qa::render_verdicts(verdicts));
  auto join_lines = [](const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) out += id + "\n";
    return out;
  };
  const auto escalate = qa::escalation_queue(votes);
  const auto redact = qa::redaction_queue(votes);
  if (!f.escalations.empty()) write_file_atomic(f.escalations, join_lines(escalate));
  if (!f.redaction.empty()) write_file_atomic(f.redaction, join_lines(redact));
  std::cerr << fmt::format("{} images, {} need a third validator, {} queued for redaction\n",
                           verdicts.size(), escalate.size(), redact.size());
  return 0;
}

struct PointsFlags {
  std::string ledger;
  bool authors = false;
  std::string csv;
  std::string award;
  long long images = 0;
  std::vector<std::string> regions;
  long long validations = 0;
  long long assigned = 0;
  long long threshold = qa::kCoAuthorThreshold;
};

int run_points(const PointsFlags& f) {
  if (!f.award.empty()) {
    std::vector<qa::Activity> activities;
    if (f.images > 0) {
      qa::Activity a{qa::ActivityKind::image_submission, {}, f.images, 0};
      for (const auto& code : f.regions) {
        const auto region = parse_region(code);
        if (!region) throw UnknownCountryError(fmt::format("unknown country code '{}'", code));
        a.regions.insert(*region);
      }
      activities.push_back(a);
    }
    if (f.validations > 0) {
      activities.push_back(qa::Activity{qa::ActivityKind::validation, {}, f.validations, 0});
    }
    if (f.assigned > 0) {
      activities.push_back(qa::Activity{qa::ActivityKind::assigned, {}, 1, f.assigned});
    }
    for (const auto& a : activities) qa::append_ledger_event(f.ledger, {f.award, a});
  }
  const auto ledger = qa::replay(qa::read_ledger_events(f.ledger), f.threshold);
  if (!f.csv.empty()) write_file_atomic(f.csv, qa::ledger_csv(ledger));
  if (f.authors) {
    std::cout << qa::render_authorship(qa::authorship_order(ledger));
  } else {
    std::cout << qa::ledger_csv(ledger);
  }
  return 0;
}

struct StatsFlags {
  std::string corpus;
  std::string votes;
  std::string csv;
};

int run_stats(const StatsFlags& f) {
  const Corpus corpus = read_corpus(f.corpus);
  const auto verdicts = qa::aggregate_all(qa::read_votes(f.votes));
  const auto stats = pipeline::dataset_stats(corpus, verdicts);
  if (!f.csv.empty()) write_file_atomic(f.csv, pipeline::dataset_stats_csv(stats));
  std::cout << pipeline::render_dataset_stats(stats);
  return 0;
}

// ---- run -------------------------------------------------------------------

int run_run(const std::string& config_path, const std::vector<std::string>& overrides) {
  const auto config = pipeline::load_pipeline_config(config_path, overrides);
  const auto summary = pipeline::run_pipeline(config);
  for (const auto& stage : summary.resumed) std::cerr << "resumed " << stage << "\n";
  std::cout << pipeline::render_summary(summary);
  std::cout << "reports in " << pipeline::reports_dir(config).string() << "\n";
  return summary.monotone() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curator: build culturally filtered, deduplicated image corpora"};
  app.require_subcommand(1);
  std::function<int()> action;

  IngestFlags ingest_flags;
  auto* ingest = app.add_subcommand("ingest", "load a manifest or crowdsource export and fetch");
  ingest->add_option("--manifest", ingest_flags.manifest, "newline-delimited JSON manifest");
  ingest->add_option("--crowdsource", ingest_flags.crowdsource, "crowdsource export (jsonl)");
  ingest->add_option("--out", ingest_flags.out, "corpus directory")->required();
  ingest->add_option("--parallelism", ingest_flags.parallelism)->capture_default_str();
  ingest->add_option("--timeout", ingest_flags.timeout, "seconds per transfer")
      ->capture_default_str();
  ingest->add_option("--max-bytes", ingest_flags.max_bytes)->capture_default_str();
  ingest->add_flag("--no-fetch", ingest_flags.no_fetch, "only write the records");
  ingest->add_option("--failures", ingest_flags.report, "CSV of failed fetches");
  ingest->callback([&] { action = [&] { return run_ingest(ingest_flags); }; });

  EmbedFlags embed_flags;
  auto* embed_cmd = app.add_subcommand("embed", "embed a corpus (warms the cache)");
  embed_cmd->add_option("--corpus", embed_flags.corpus)->required();
  embed_cmd->add_option("--reference-out", embed_flags.reference_out,
                        "write the embeddings as a reference set file");
  embed_cmd->add_option("--provenance", embed_flags.provenance);
  embed_flags.provider.attach(*embed_cmd);
  embed_cmd->callback([&] { action = [&] { return run_embed(embed_flags); }; });

  FilterFlags filter_flags;
  auto* filter_cmd = app.add_subcommand("filter", "score against a reference set");
  filter_cmd->add_option("--corpus", filter_flags.corpus)->required();
  filter_cmd->add_option("--reference", filter_flags.reference)->required();
  filter_cmd->add_option("--out", filter_flags.out, "scored corpus directory")->required();
  filter_cmd->add_option("--rho", filter_flags.rho)->capture_default_str();
  filter_cmd->add_option("--floor", filter_flags.floor)->capture_default_str();
  filter_cmd->add_option("--workers", filter_flags.workers)->capture_default_str();
  filter_cmd->add_option("--total", filter_flags.total, "denominator for the retention table");
  filter_cmd->add_option("--csv", filter_flags.csv, "retention table CSV");
  filter_flags.provider.attach(*filter_cmd);
  filter_cmd->callback([&] { action = [&] { return run_filter(filter_flags); }; });

  CalibrateFlags cal_flags;
  auto* cal = app.add_subcommand("calibrate", "sample buckets, serve the review API, report");
  cal->add_option("--scored", cal_flags.scored)->required();
  cal->add_option("--per-bucket", cal_flags.per_bucket)->capture_default_str();
  cal->add_option("--seed", cal_flags.seed)->capture_default_str();
  cal->add_option("--target-relevance", cal_flags.target)->capture_default_str();
  cal->add_option("--ratings", cal_flags.ratings, "rating log (jsonl)");
  cal->add_option("--serve", cal_flags.serve, "[host]:port for the review API");
  cal->add_option("--static", cal_flags.static_dir, "UI assets to serve at /");
  cal->add_option("--pairs-corpus", cal_flags.pairs_corpus, "corpus to draw dedup pairs from");
  cal->add_option("--pairs-method", cal_flags.pairs_method)->capture_default_str();
  cal->add_option("--pairs", cal_flags.pairs)->capture_default_str();
  cal->add_option("--epsilon", cal_flags.epsilon)->capture_default_str();
  cal->add_option("--max-hamming", cal_flags.max_hamming)->capture_default_str();
  cal->add_option("--sample-out", cal_flags.sample_out, "CSV of the drawn sample");
  cal->callback([&] { action = [&] { return run_calibrate(cal_flags); }; });

  DedupFlags dedup_flags;
  auto* dedup_cmd = app.add_subcommand("dedup", "cluster near duplicates");
  dedup_cmd->add_option("--corpus", dedup_flags.corpus)->required();
  dedup_cmd->add_option("--method", dedup_flags.method)->capture_default_str();
  dedup_cmd->add_option("--epsilon", dedup_flags.epsilon)->capture_default_str();
  dedup_cmd->add_option("--max-hamming", dedup_flags.max_hamming)->capture_default_str();
  dedup_cmd->add_option("--out", dedup_flags.out)->required();
  dedup_cmd->add_option("--workers", dedup_flags.workers)->capture_default_str();
  dedup_cmd->add_option("--scan", dedup_flags.scan, "auto, exhaustive or blocked")
      ->capture_default_str();
  dedup_flags.provider.attach(*dedup_cmd);
  dedup_cmd->callback([&] { action = [&] { return run_dedup(dedup_flags); }; });

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "dedup throughput");
  bench->add_option("--corpus", bench_flags.corpus);
  bench->add_option("--synthetic", bench_flags.synthetic, "generate N synthetic images");
  bench->add_option("--method", bench_flags.method, "phash, embedding or both")
      ->capture_default_str();
  bench->add_option("--repetitions", bench_flags.repetitions)->capture_default_str();
  bench->add_option("--csv", bench_flags.csv);
  bench_flags.provider.attach(*bench);
  bench->callback([&] { action = [&] { return run_bench(bench_flags); }; });

  QaFlags qa_flags;
  auto* qa_cmd = app.add_subcommand("qa", "aggregate validation votes into verdicts");
  qa_cmd->add_option("--votes", qa_flags.votes)->required();
  qa_cmd->add_option("--report", qa_flags.report, "verdicts CSV");
  qa_cmd->add_option("--text", qa_flags.text, "text rendering (default stdout)");
  qa_cmd->add_option("--escalations", qa_flags.escalations, "images needing a third validator");
  qa_cmd->add_option("--redaction", qa_flags.redaction, "images flagged for PII");
  qa_cmd->callback([&] { action = [&] { return run_qa(qa_flags); }; });

  PointsFlags points_flags;
  auto* points = app.add_subcommand("points", "contribution ledger and authorship");
  points->add_option("--ledger", points_flags.ledger)->required();
  points->add_flag("--authors", points_flags.authors, "print the authorship order");
  points->add_option("--csv", points_flags.csv);
  points->add_option("--award", points_flags.award, "contributor to credit");
  points->add_option("--images", points_flags.images);
  points->add_option("--region", points_flags.regions, "country code(s) of the images");
  points->add_option("--validations", points_flags.validations);
  points->add_option("--assigned", points_flags.assigned);
  points->add_option("--threshold", points_flags.threshold)->capture_default_str();
  points->callback([&] { action = [&] { return run_points(points_flags); }; });

  StatsFlags stats_flags;
  auto* stats = app.add_subcommand("stats", "per-region statistics of accepted images");
  stats->add_option("--corpus", stats_flags.corpus)->required();
  stats->add_option("--votes", stats_flags.votes)->required();
  stats->add_option("--csv", stats_flags.csv);
  stats->callback([&] { action = [&] { return run_stats(stats_flags); }; });

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the whole pipeline from a config file");
  run->add_option("--config", config_path)->required();
  run->allow_extras();
  run->callback([&] { action = [&] { return run_run(config_path, run->remaining()); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action ? action() : 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
