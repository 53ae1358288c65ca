#include "curator/dedup/dedup.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "curator/core/errors.hpp"
#include "curator/dedup/disjoint_set.hpp"
#include "curator/dedup/phash.hpp"

namespace curator::dedup {

namespace fs = std::filesystem;

namespace {

using Edge = std::pair<std::size_t, std::size_t>;

bool has_feature(const DedupItem& item, Method method) {
  return method == Method::phash ? item.hash.has_value() : item.embedding.has_value();
}

// Rows are dealt round-robin so the triangular pair space balances.
std::vector<Edge> exhaustive_edges(std::span<const DedupItem> items,
                                   const std::vector<std::size_t>& usable,
                                   const DedupConfig& config, std::size_t workers) {
  workers = std::max<std::size_t>(1, std::min(workers, usable.size()));
  std::vector<std::vector<Edge>> partial(workers);
  auto scan = [&](std::size_t w) {
    for (std::size_t a = w; a < usable.size(); a += workers) {
      for (std::size_t b = a + 1; b < usable.size(); ++b) {
        if (is_duplicate(items[usable[a]], items[usable[b]], config)) {
          partial[w].emplace_back(usable[a], usable[b]);
        }
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(scan, w);
    scan(0);
  }
  std::vector<Edge> edges;
  for (auto& p : partial) edges.insert(edges.end(), p.begin(), p.end());
  return edges;
}

// Pigeonhole blocking: with max_hamming + 1 disjoint bit segments, any pair
// within the distance agrees exactly on at least one segment.
void blocked_phash(std::span<const DedupItem> items, const std::vector<std::size_t>& usable,
                   const DedupConfig& config, DisjointSet& sets) {
  const int segments = config.max_hamming + 1;
  for (int s = 0; s < segments; ++s) {
    const int lo = s * 64 / segments;
    const int hi = (s + 1) * 64 / segments;
    const int width = hi - lo;
    const std::uint64_t mask = width >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (const std::size_t i : usable) buckets[(items[i].hash->bits >> lo) & mask].push_back(i);
    for (auto& [key, members] : buckets) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          if (sets.find(members[a]) == sets.find(members[b])) continue;
          if (is_duplicate(items[members[a]], items[members[b]], config)) {
            sets.unite(members[a], members[b]);
          }
        }
      }
    }
  }
}

// Random-hyperplane signatures split into bands; pairs sharing any band are
// verified exactly. Recall is high for cosine >= 0.85 but not guaranteed.
void blocked_embedding(std::span<const DedupItem> items, const std::vector<std::size_t>& usable,
                       const DedupConfig& config, DisjointSet& sets) {
  if (usable.empty()) return;
  constexpr int kPlanes = 64;
  constexpr int kBandBits = 8;
  const std::size_t dims = items[usable.front()].embedding->dims();
  std::mt19937_64 rng(0x5eedULL);
  std::vector<double> planes(kPlanes * dims);
  for (auto& p : planes) p = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;

  std::vector<std::uint64_t> signature(items.size(), 0);
  for (const std::size_t i : usable) {
    const auto values = items[i].embedding->values();
    if (values.size() != dims) throw DimensionError("embedding dims differ within the corpus");
    std::uint64_t sig = 0;
    for (int p = 0; p < kPlanes; ++p) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dims; ++d) dot += planes[p * dims + d] * values[d];
      if (dot >= 0) sig |= std::uint64_t{1} << p;
    }
    signature[i] = sig;
  }
  for (int band = 0; band < kPlanes / kBandBits; ++band) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (const std::size_t i : usable) {
      buckets[(signature[i] >> (band * kBandBits)) & 0xFF].push_back(i);
    }
    for (auto& [key, members] : buckets) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          if (sets.find(members[a]) == sets.find(members[b])) continue;
          if (is_duplicate(items[members[a]], items[members[b]], config)) {
            sets.unite(members[a], members[b]);
          }
        }
      }
    }
  }
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  const auto ns =
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start)
          .count();
  return static_cast<double>(std::max<long long>(ns, 1)) * 1e-9;
}

}  // namespace

std::string_view to_string(Method method) {
  return method == Method::phash ? "phash" : "embedding";
}

std::optional<Method> parse_method(std::string_view text) {
  if (text == "phash") return Method::phash;
  if (text == "embedding") return Method::embedding;
  return std::nullopt;
}

void DedupConfig::validate() const {
  if (method == Method::embedding && !(epsilon > 0.0 && epsilon <= 1.0)) {
    throw ConfigError(fmt::format("epsilon {} outside (0, 1]", epsilon));
  }
  if (max_hamming < 0 || max_hamming > 64) {
    throw ConfigError(fmt::format("max_hamming {} outside [0, 64]", max_hamming));
  }
}

bool is_duplicate(const DedupItem& a, const DedupItem& b, const DedupConfig& config) {
  if (config.method == Method::phash) {
    if (!a.hash || !b.hash) {
      throw MissingFeatureError(fmt::format("missing hash for {} or {}", a.id, b.id));
    }
    return hamming(*a.hash, *b.hash) <= config.max_hamming;
  }
  if (!a.embedding || !b.embedding) {
    throw MissingFeatureError(fmt::format("missing embedding for {} or {}", a.id, b.id));
  }
  return cosine(*a.embedding, *b.embedding) >= config.epsilon;
}

DedupResult dedup_corpus(std::span<const DedupItem> items, const DedupConfig& config,
                         const ScanOptions& options) {
  config.validate();
  DedupResult result;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (has_feature(items[i], config.method)) {
      usable.push_back(i);
    } else {
      result.flagged.push_back(items[i].id);
    }
  }
  std::sort(result.flagged.begin(), result.flagged.end());

  DisjointSet sets(items.size());
  ScanStrategy strategy = options.strategy;
  if (strategy == ScanStrategy::automatic) {
    strategy =
        usable.size() < options.exhaustive_limit ? ScanStrategy::exhaustive : ScanStrategy::blocked;
  }
  if (strategy == ScanStrategy::blocked && config.method == Method::phash &&
      config.max_hamming >= 64) {
    strategy = ScanStrategy::exhaustive;  // every pair is a duplicate; nothing to block on
  }

  if (strategy == ScanStrategy::exhaustive) {
    // Serialized reduction; component structure does not depend on edge order.
    for (const auto& [a, b] : exhaustive_edges(items, usable, config, options.workers)) {
      sets.unite(a, b);
    }
  } else if (config.method == Method::phash) {
    blocked_phash(items, usable, config, sets);
  } else {
    blocked_embedding(items, usable, config, sets);
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) groups[sets.find(i)].push_back(i);

  for (auto& [root, members] : groups) {
    DuplicateCluster cluster;
    const DedupItem* canonical = nullptr;
    for (const std::size_t m : members) {
      const auto& item = items[m];
      cluster.member_ids.push_back(item.id);
      const bool better =
          !canonical ||
          (item.source == Source::crowdsourced && canonical->source != Source::crowdsourced) ||
          (item.source == canonical->source && item.id < canonical->id);
      if (better) canonical = &item;
    }
    std::sort(cluster.member_ids.begin(), cluster.member_ids.end());
    cluster.canonical_id = canonical->id;
    result.clusters.push_back(std::move(cluster));
  }
  std::sort(result.clusters.begin(), result.clusters.end(),
            [](const DuplicateCluster& a, const DuplicateCluster& b) {
              return a.canonical_id < b.canonical_id;
            });
  for (std::size_t c = 0; c < result.clusters.size(); ++c) {
    result.clusters[c].cluster_id = fmt::format("c{:06d}", c);
  }
  return result;
}

std::vector<std::string> survivors(const std::vector<DuplicateCluster>& clusters) {
  std::vector<std::string> ids;
  ids.reserve(clusters.size());
  for (const auto& cluster : clusters) ids.push_back(cluster.canonical_id);
  return ids;
}

Corpus survivors(const std::vector<DuplicateCluster>& clusters, const Corpus& corpus) {
  std::unordered_map<std::string, const ImageRecord*> by_id;
  for (const auto& record : corpus) by_id.emplace(record.id, &record);
  Corpus out;
  out.reserve(clusters.size());
  for (const auto& cluster : clusters) {
    const auto it = by_id.find(cluster.canonical_id);
    if (it == by_id.end()) {
      throw PreconditionError(fmt::format("canonical id {} not in corpus", cluster.canonical_id));
    }
    ImageRecord record = *it->second;
    record.cluster_id = cluster.cluster_id;
    out.push_back(std::move(record));
  }
  return out;
}

std::vector<DedupItem> extract_features(const Corpus& corpus, const DedupConfig& config,
                                        embed::Provider* provider, std::size_t workers,
                                        std::vector<std::string>* errors) {
  if (config.method == Method::embedding && provider == nullptr) {
    throw ConfigError("embedding dedup needs an embedding provider");
  }
  std::vector<DedupItem> items(corpus.size());
  std::vector<std::string> reasons(corpus.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < corpus.size(); i = next++) {
      const auto& record = corpus[i];
      auto& item = items[i];
      item.id = record.id;
      item.source = record.source;
      if (!record.local_path) {
        reasons[i] = "no local image";
        continue;
      }
      try {
        const Bytes bytes = read_file_bytes(*record.local_path);
        if (config.method == Method::phash) {
          item.hash = phash64(bytes);
        } else {
          item.embedding = provider->encode(bytes);
        }
      } catch (const Error& e) {
        reasons[i] = e.what();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, corpus.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (errors) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!reasons[i].empty()) errors->push_back(fmt::format("{}: {}", corpus[i].id, reasons[i]));
    }
  }
  return items;
}

std::vector<ScoredPair> duplicate_pairs(std::span<const DedupItem> items,
                                        const DedupConfig& config) {
  config.validate();
  std::vector<ScoredPair> pairs;
  for (std::size_t a = 0; a < items.size(); ++a) {
    if (!has_feature(items[a], config.method)) continue;
    for (std::size_t b = a + 1; b < items.size(); ++b) {
      if (!has_feature(items[b], config.method)) continue;
      if (!is_duplicate(items[a], items[b], config)) continue;
      ScoredPair pair;
      pair.id_a = std::min(items[a].id, items[b].id);
      pair.id_b = std::max(items[a].id, items[b].id);
      pair.score = config.method == Method::phash
                       ? static_cast<double>(hamming(*items[a].hash, *items[b].hash))
                       : cosine(*items[a].embedding, *items[b].embedding);
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

std::vector<ThroughputSample> measure_throughput(const DedupConfig& config,
                                                 std::span<const Bytes> images,
                                                 std::size_t repetitions,
                                                 embed::Provider* provider) {
  config.validate();
  if (images.empty()) throw EmptyInputError("throughput needs at least one image");
  if (repetitions < 1) throw PreconditionError("repetitions must be at least 1");
  if (config.method == Method::embedding && provider == nullptr) {
    throw ConfigError("embedding throughput needs an embedding provider");
  }
  std::vector<ThroughputSample> samples;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<DedupItem> items(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
      items[i].id = fmt::format("img{:07d}", i);
      if (config.method == Method::phash) {
        items[i].hash = phash64(images[i]);
      } else {
        items[i].embedding = provider->encode(images[i]);
      }
    }
    std::vector<std::size_t> all(items.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto edges = exhaustive_edges(items, all, config, 1);
    (void)edges;

    ThroughputSample sample;
    sample.method = config.method;
    sample.images_processed = images.size();
    sample.elapsed_seconds = elapsed_since(start);
    sample.images_per_second =
        static_cast<double>(sample.images_processed) / sample.elapsed_seconds;
    samples.push_back(sample);
  }
  return samples;
}

std::string cluster_report_csv(const std::vector<DuplicateCluster>& clusters) {
  std::string out = "cluster_id,member_id,is_canonical\n";
  for (const auto& cluster : clusters) {
    for (const auto& member : cluster.member_ids) {
      out += fmt::format("{},{},{}\n", cluster.cluster_id, member,
                         member == cluster.canonical_id ? "true" : "false");
    }
  }
  return out;
}

std::vector<DuplicateCluster> parse_cluster_report_csv(std::string_view csv) {
  std::vector<DuplicateCluster> clusters;
  std::size_t line_no = 0;
  while (!csv.empty()) {
    const auto end = csv.find('\n');
    std::string_view line = csv.substr(0, end);
    csv = end == std::string_view::npos ? std::string_view() : csv.substr(end + 1);
    if (line_no++ == 0 || line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
      throw ParseError(fmt::format("cluster report line {}: expected three fields", line_no));
    }
    const std::string cluster_id(line.substr(0, c1));
    const std::string member(line.substr(c1 + 1, c2 - c1 - 1));
    const std::string_view flag = line.substr(c2 + 1);
    if (clusters.empty() || clusters.back().cluster_id != cluster_id) {
      clusters.push_back(DuplicateCluster{cluster_id, {}, {}});
    }
    clusters.back().member_ids.push_back(member);
    if (flag == "true") clusters.back().canonical_id = member;
  }
  for (const auto& cluster : clusters) {
    if (cluster.canonical_id.empty()) {
      throw ParseError(fmt::format("cluster {} has no canonical member", cluster.cluster_id));
    }
  }
  return clusters;
}

std::string render_throughput(const std::vector<ThroughputSample>& samples) {
  std::string out =
      fmt::format("{:<10} {:>8} {:>12} {:>12}\n", "method", "images", "seconds", "images/s");
  for (const auto& s : samples) {
    out += fmt::format("{:<10} {:>8} {:>12.4f} {:>12.2f}\n", to_string(s.method),
                       s.images_processed, s.elapsed_seconds, s.images_per_second);
  }
  return out;
}

void write_hash_sidecar(const fs::path& path, std::span<const DedupItem> items) {
  std::string out;
  for (const auto& item : items) {
    if (item.hash) out += fmt::format("{},{}\n", item.id, item.hash->to_hex());
  }
  write_file_atomic(path, out);
}

std::vector<std::pair<std::string, PerceptualHash>> read_hash_sidecar(const fs::path& path) {
  std::vector<std::pair<std::string, PerceptualHash>> out;
  for_each_line(path, [&](std::size_t number, std::string_view line) {
    if (line.empty()) return;
    const auto comma = line.rfind(',');
    const auto hash = comma == std::string_view::npos
                          ? std::nullopt
                          : PerceptualHash::from_hex(line.substr(comma + 1));
    if (!hash || comma == 0) {
      throw ParseError(fmt::format("{}:{}: expected id,hex16", path.string(), number));
    }
    out.emplace_back(std::string(line.substr(0, comma)), *hash);
  });
  return out;
}

}  // namespace curator::dedup
