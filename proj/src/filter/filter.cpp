#include "curator/filter/filter.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "curator/core/corpus_io.hpp"
#include "curator/core/errors.hpp"
#include "curator/core/format.hpp"
#include "curator/core/io.hpp"

namespace curator::filter {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kReferenceMagic[8] = {'C', 'U', 'R', 'A', 'T', 'R', 'E', 'F'};

void put_u32(Bytes& out, std::uint32_t value) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
}

std::uint32_t get_u32(const Bytes& in, std::size_t offset) {
  std::uint32_t value = 0;
  for (int b = 3; b >= 0; --b) value = (value << 8) | in[offset + static_cast<std::size_t>(b)];
  return value;
}

}  // namespace

void FilterConfig::validate() const {
  if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError(fmt::format("rho {} outside [-1, 1]", rho));
  if (!(prefilter_floor <= rho)) {
    throw ConfigError(fmt::format("prefilter floor {} exceeds rho {}", prefilter_floor, rho));
  }
  reference.validate();
}

std::vector<std::string> ScoredCorpus::retained_ids() const {
  std::vector<std::string> ids;
  for (const auto& entry : entries) {
    if (is_retained(entry)) ids.push_back(entry.record.id);
  }
  return ids;
}

Corpus ScoredCorpus::retained_records() const {
  Corpus out;
  for (const auto& entry : entries) {
    if (is_retained(entry)) out.push_back(entry.record);
  }
  return out;
}

double mean_reference_similarity(const EmbeddingVector& x, const ReferenceSet& reference) {
  if (reference.embeddings.empty()) throw EmptyReferenceError("reference set is empty");
  std::vector<double> terms;
  terms.reserve(reference.embeddings.size());
  for (const auto& z : reference.embeddings) terms.push_back(cosine(x, z));
  std::sort(terms.begin(), terms.end());
  if (terms.front() == terms.back()) return terms.front();
  double sum = 0.0;
  for (const double t : terms) sum += t;
  return sum / static_cast<double>(terms.size());
}

ScoredCorpus score_corpus(const Corpus& records,
                          const std::vector<std::optional<EmbeddingVector>>& embeddings,
                          const std::vector<std::string>& failure_reasons,
                          const FilterConfig& config) {
  config.validate();
  if (embeddings.size() != records.size()) {
    throw PreconditionError("one embedding slot per record is required");
  }
  ScoredCorpus scored;
  scored.rho = config.rho;
  scored.prefilter_floor = config.prefilter_floor;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!embeddings[i]) {
      const std::string reason = i < failure_reasons.size() && !failure_reasons[i].empty()
                                     ? failure_reasons[i]
                                     : "no embedding";
      scored.unscored.push_back({records[i].id, reason});
      continue;
    }
    const double score = mean_reference_similarity(*embeddings[i], config.reference);
    if (score < config.prefilter_floor) {
      ++scored.below_floor;
      continue;
    }
    ScoredEntry entry{records[i], score, assign_bucket(score).label};
    entry.record.similarity_score = score;
    entry.record.bucket = entry.bucket;
    scored.entries.push_back(std::move(entry));
  }
  std::sort(scored.entries.begin(), scored.entries.end(),
            [](const ScoredEntry& a, const ScoredEntry& b) { return a.record.id < b.record.id; });
  std::sort(scored.unscored.begin(), scored.unscored.end(),
            [](const UnscoredImage& a, const UnscoredImage& b) { return a.id < b.id; });
  return scored;
}

ScoredCorpus filter_corpus(const Corpus& corpus, embed::Provider& provider,
                           const FilterConfig& config, std::size_t parallelism) {
  config.validate();
  if (config.reference.dims() != provider.dims()) {
    throw DimensionError(fmt::format("reference dims {} differ from provider dims {}",
                                     config.reference.dims(), provider.dims()));
  }
  std::vector<std::optional<EmbeddingVector>> embeddings(corpus.size());
  std::vector<std::string> reasons(corpus.size());

  const std::size_t batch = std::max<std::size_t>(1, provider.config().batch_size);
  const std::size_t chunks = (corpus.size() + batch - 1) / batch;
  std::atomic<std::size_t> next_chunk{0};

  auto worker = [&] {
    for (std::size_t c = next_chunk++; c < chunks; c = next_chunk++) {
      const std::size_t begin = c * batch;
      const std::size_t end = std::min(corpus.size(), begin + batch);
      std::vector<Bytes> payloads;
      std::vector<std::size_t> indices;
      for (std::size_t i = begin; i < end; ++i) {
        if (!corpus[i].local_path) {
          reasons[i] = "no local image";
          continue;
        }
        try {
          payloads.push_back(read_file_bytes(*corpus[i].local_path));
          indices.push_back(i);
        } catch (const IoError& e) {
          reasons[i] = e.what();
        }
      }
      std::vector<ByteView> views(payloads.begin(), payloads.end());
      auto results = provider.encode_batch(views);
      for (std::size_t k = 0; k < indices.size(); ++k) {
        if (results[k].ok()) {
          embeddings[indices[k]] = std::move(*results[k].vector);
        } else {
          reasons[indices[k]] = results[k].error;
        }
      }
    }
  };

  const std::size_t workers =
      std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(chunks, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  return score_corpus(corpus, embeddings, reasons, config);
}

RetentionTable retention_from_counts(const std::array<std::size_t, kBucketCount - 1>& counts,
                                     std::size_t total_count) {
  std::size_t stored = 0;
  for (const auto n : counts) stored += n;
  if (total_count < stored) {
    throw ArithmeticError(
        fmt::format("total count {} is smaller than the {} bucketed images", total_count, stored));
  }
  RetentionTable table;
  table.total = total_count;
  auto percent = [&](std::size_t n) {
    return total_count == 0 ? 0.0
                            : 100.0 * static_cast<double>(n) / static_cast<double>(total_count);
  };
  table.rows.push_back({BucketLabel::Dropped, total_count - stored, percent(total_count - stored)});
  for (std::size_t b = 0; b < counts.size(); ++b) {
    table.rows.push_back({static_cast<BucketLabel>(b + 1), counts[b], percent(counts[b])});
  }
  return table;
}

RetentionTable threshold_sweep(const ScoredCorpus& scored, std::size_t total_count) {
  if (total_count < scored.entries.size()) {
    throw ArithmeticError(fmt::format("total count {} is smaller than the {} stored scores",
                                      total_count, scored.entries.size()));
  }
  std::array<std::size_t, kBucketCount - 1> counts{};
  for (const auto& entry : scored.entries) {
    if (entry.bucket != BucketLabel::Dropped) ++counts[static_cast<std::size_t>(entry.bucket) - 1];
  }
  return retention_from_counts(counts, total_count);
}

std::string retention_csv(const RetentionTable& table) {
  std::string out = "bucket,count,percent\n";
  for (const auto& row : table.rows) {
    out += fmt::format("{},{},{:.4f}\n", to_string(row.bucket), row.count, row.percent);
  }
  return out;
}

std::string render_retention(const RetentionTable& table) {
  std::string out =
      fmt::format("{:<10} {:<16} {:>14} {:>9}\n", "Bucket", "Threshold", "#Images", "%Images");
  for (const auto& row : table.rows) {
    const auto& bucket = bucket_of(row.bucket);
    std::string range;
    if (row.bucket == BucketLabel::Dropped) {
      range = fmt::format("<{:.1f}", bucket.upper);
    } else if (row.bucket == BucketLabel::Diamond) {
      range = fmt::format(">={:.1f}", bucket.lower);
    } else {
      range = fmt::format("[{:.1f}...{:.1f})", bucket.lower, bucket.upper);
    }
    out += fmt::format("{:<10} {:<16} {:>14} {:>8.2f}%\n", to_string(row.bucket), range,
                       with_thousands(row.count), row.percent);
  }
  out += fmt::format("{:<10} {:<16} {:>14}\n", "Total", "", with_thousands(table.total));
  return out;
}

void write_reference_file(const fs::path& path, const ReferenceSet& reference) {
  reference.validate();
  Bytes out(kReferenceMagic, kReferenceMagic + sizeof(kReferenceMagic));
  put_u32(out, static_cast<std::uint32_t>(reference.dims()));
  put_u32(out, static_cast<std::uint32_t>(reference.embeddings.size()));
  for (const auto& e : reference.embeddings) {
    for (const float v : e.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  write_file_atomic(path, out);
}

ReferenceSet read_reference_file(const fs::path& path) {
  const Bytes in = read_file_bytes(path);
  if (in.size() < 16 || std::memcmp(in.data(), kReferenceMagic, sizeof(kReferenceMagic)) != 0) {
    throw ParseError(fmt::format("{} is not a reference matrix file", path.string()));
  }
  const std::uint32_t dims = get_u32(in, 8);
  const std::uint32_t count = get_u32(in, 12);
  if (count == 0) throw EmptyReferenceError(fmt::format("{} holds no vectors", path.string()));
  if (dims < 1 || in.size() != 16 + static_cast<std::size_t>(dims) * count * 4) {
    throw ParseError(fmt::format("{} has a size inconsistent with its header", path.string()));
  }
  ReferenceSet reference;
  reference.provenance = path.filename().string();
  std::vector<float> row(dims);
  for (std::uint32_t r = 0; r < count; ++r) {
    for (std::uint32_t d = 0; d < dims; ++d) {
      row[d] = std::bit_cast<float>(get_u32(in, 16 + (static_cast<std::size_t>(r) * dims + d) * 4));
    }
    reference.embeddings.push_back(normalize(std::span<const float>(row)));
  }
  return reference;
}

void write_scored_corpus(const fs::path& dir, const ScoredCorpus& scored) {
  fs::create_directories(dir);
  std::string lines;
  for (const auto& entry : scored.entries) {
    lines += record_to_json(entry.record).dump();
    lines += '\n';
  }
  json meta;
  meta["rho"] = scored.rho;
  meta["prefilter_floor"] = scored.prefilter_floor;
  meta["below_floor"] = scored.below_floor;
  meta["unscored"] = json::array();
  for (const auto& u : scored.unscored)
    meta["unscored"].push_back({{"id", u.id}, {"reason", u.reason}});
  write_file_atomic(dir / "scored.jsonl", lines);
  write_file_atomic(dir / "scored_meta.json", meta.dump(2) + "\n");
}

ScoredCorpus read_scored_corpus(const fs::path& dir) {
  ScoredCorpus scored;
  json meta;
  try {
    meta = json::parse(read_file_text(dir / "scored_meta.json"));
    scored.rho = meta.at("rho").get<double>();
    scored.prefilter_floor = meta.at("prefilter_floor").get<double>();
    scored.below_floor = meta.at("below_floor").get<std::size_t>();
    for (const auto& u : meta.at("unscored")) {
      scored.unscored.push_back({u.at("id").get<std::string>(), u.at("reason").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("bad scored metadata in {}: {}", dir.string(), e.what()));
  }
  const auto base = fs::absolute(dir);
  for_each_line(dir / "scored.jsonl", [&](std::size_t number, std::string_view line) {
    if (line.empty()) return;
    try {
      auto record = record_from_json(json::parse(line));
      if (!record.similarity_score) throw ParseError("missing similarity_score");
      if (record.local_path && record.local_path->is_relative()) {
        record.local_path = (base / *record.local_path).lexically_normal();
      }
      const double score = *record.similarity_score;
      const auto bucket = assign_bucket(score).label;
      record.bucket = bucket;
      scored.entries.push_back({std::move(record), score, bucket});
    } catch (const std::exception& e) {
      throw ParseError(fmt::format("scored.jsonl:{}: {}", number, e.what()));
    }
  });
  return scored;
}

}  // namespace curator::filter
