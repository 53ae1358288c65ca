#include "oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>

namespace curator::oracle {

double mean_similarity(const std::vector<float>& x, const std::vector<std::vector<float>>& refs) {
  long double total = 0.0L;
  for (const auto& z : refs) {
    long double dot = 0.0L, xx = 0.0L, zz = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
      dot += static_cast<long double>(x[i]) * static_cast<long double>(z[i]);
      xx += static_cast<long double>(x[i]) * static_cast<long double>(x[i]);
      zz += static_cast<long double>(z[i]) * static_cast<long double>(z[i]);
    }
    total += std::clamp(dot / std::sqrt(xx * zz), -1.0L, 1.0L);
  }
  return static_cast<double>(total / static_cast<long double>(refs.size()));
}

std::set<std::string> retained(const std::vector<std::string>& ids,
                               const std::vector<std::vector<float>>& embeddings,
                               const std::vector<std::vector<float>>& refs, double rho) {
  std::set<std::string> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (mean_similarity(embeddings[i], refs) >= rho) out.insert(ids[i]);
  }
  return out;
}

namespace {

bool linked(const dedup::DedupItem& a, const dedup::DedupItem& b,
            const dedup::DedupConfig& config) {
  if (config.method == dedup::Method::phash) {
    return std::popcount(a.hash->bits ^ b.hash->bits) <= config.max_hamming;
  }
  const auto x = a.embedding->values();
  const auto y = b.embedding->values();
  long double dot = 0.0L, xx = 0.0L, yy = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += static_cast<long double>(x[i]) * y[i];
    xx += static_cast<long double>(x[i]) * x[i];
    yy += static_cast<long double>(y[i]) * y[i];
  }
  return static_cast<double>(dot / std::sqrt(xx * yy)) >= config.epsilon;
}

bool has_feature(const dedup::DedupItem& item, const dedup::DedupConfig& config) {
  return config.method == dedup::Method::phash ? item.hash.has_value() : item.embedding.has_value();
}

}  // namespace

std::set<Cluster> clusters(const std::vector<dedup::DedupItem>& items,
                           const dedup::DedupConfig& config) {
  const std::size_t n = items.size();
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_feature(items[i], config)) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && has_feature(items[j], config) && linked(items[i], items[j], config)) {
        adjacency[i].push_back(j);
      }
    }
  }
  std::vector<bool> seen(n, false);
  std::set<Cluster> out;
  for (std::size_t start = 0; start < n; ++start) {
    if (seen[start]) continue;
    Cluster cluster;
    std::deque<std::size_t> queue{start};
    seen[start] = true;
    std::vector<std::size_t> members;
    while (!queue.empty()) {
      const std::size_t at = queue.front();
      queue.pop_front();
      members.push_back(at);
      for (const std::size_t next : adjacency[at]) {
        if (!seen[next]) {
          seen[next] = true;
          queue.push_back(next);
        }
      }
    }
    std::string best_crowd;
    std::string best_any;
    for (const std::size_t m : members) {
      const auto& id = items[m].id;
      cluster.members.insert(id);
      if (best_any.empty() || id < best_any) best_any = id;
      if (items[m].source == Source::crowdsourced && (best_crowd.empty() || id < best_crowd)) {
        best_crowd = id;
      }
    }
    cluster.canonical = best_crowd.empty() ? best_any : best_crowd;
    out.insert(std::move(cluster));
  }
  return out;
}

std::uint64_t phash(const image::RgbImage& image) {
  constexpr int N = 32;
  if (image.width % N != 0 || image.height % N != 0) {
    throw std::invalid_argument("oracle phash needs sides that are multiples of 32");
  }
  const int bw = image.width / N;
  const int bh = image.height / N;
  double thumb[N][N];  // [row][col]
  for (int r = 0; r < N; ++r) {
    for (int c = 0; c < N; ++c) {
      double sum = 0.0;
      for (int y = r * bh; y < (r + 1) * bh; ++y) {
        for (int x = c * bw; x < (c + 1) * bw; ++x) {
          const auto* p = &image.pixels[(static_cast<std::size_t>(y) * image.width + x) * 3];
          sum += 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
      }
      thumb[r][c] = sum / (bw * bh);
    }
  }
  const double pi = std::acos(-1.0);
  std::vector<long long> coeffs;
  for (int u = 0; u < 8; ++u) {    // vertical frequency
    for (int v = 0; v < 8; ++v) {  // horizontal frequency
      const double au = u == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
      const double av = v == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
      double sum = 0.0;
      for (int r = 0; r < N; ++r) {
        for (int c = 0; c < N; ++c) {
          sum += thumb[r][c] * std::cos((2 * r + 1) * u * pi / (2 * N)) *
                 std::cos((2 * c + 1) * v * pi / (2 * N));
        }
      }
      coeffs.push_back(std::llround(au * av * sum * 1e6));
    }
  }
  auto sorted = coeffs;
  std::sort(sorted.begin(), sorted.end());
  const long long median = sorted[31];
  std::uint64_t bits = 0;
  for (int i = 0; i < 64; ++i) {
    if (coeffs[i] > median) bits |= std::uint64_t{1} << (63 - i);
  }
  return bits;
}

Flags verdict_flags(double quality, double relevance, std::optional<double> caption,
                    std::size_t validators) {
  const int decided = validators >= 2 ? 1 : 0;
  const auto flag = [&](bool pass) { return pass ? decided : -1; };
  Flags f{};
  f.quality = flag(quality > 0.5);
  f.relevance = flag(relevance >= 3.0);
  f.caption = caption ? flag(*caption > 0.5) : 0;
  f.overall = std::min({f.quality, f.relevance, f.caption});
  return f;
}

}  // namespace curator::oracle
