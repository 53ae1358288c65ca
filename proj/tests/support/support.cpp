#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <fmt/format.h>

#include "curator/core/io.hpp"
#include "curator/embed/provider.hpp"
#include "curator/filter/filter.hpp"
#include "curator/image/synthetic.hpp"

namespace curator::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          fmt::format("curator-test-{}-{}-{}", ::getpid(), stamp, counter++);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

LocalServer::LocalServer() = default;

LocalServer::~LocalServer() {
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

int LocalServer::start() {
  port_ = server_.bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
  return port_;
}

std::vector<double> random_gaussian(std::mt19937_64& rng, std::size_t dims) {
  std::normal_distribution<double> normal;
  std::vector<double> out(dims);
  for (auto& v : out) v = normal(rng);
  return out;
}

EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dims) {
  const auto raw = random_gaussian(rng, dims);
  return normalize(std::span<const double>(raw));
}

EmbeddingVector vector_at_cosine(std::mt19937_64& rng, const EmbeddingVector& base, double target) {
  const auto b = base.values();
  auto r = random_gaussian(rng, b.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) dot += r[i] * b[i];
  double norm = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    r[i] -= dot * b[i];
    norm += r[i] * r[i];
  }
  norm = std::sqrt(norm);
  const double s = std::sqrt(1.0 - target * target);
  std::vector<double> out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) out[i] = target * b[i] + s * r[i] / norm;
  return normalize(std::span<const double>(out));
}

Corpus write_synthetic_corpus(const fs::path& dir, std::size_t count, std::uint64_t seed0,
                              int side) {
  fs::create_directories(dir / "images");
  Corpus corpus;
  for (std::size_t i = 0; i < count; ++i) {
    ImageRecord record;
    record.id = fmt::format("img{:04d}", i);
    record.local_path = dir / "images" / (record.id + ".png");
    write_file_atomic(*record.local_path,
                      ByteView(image::encode_png(image::synthetic_image(seed0 + i, side, side))));
    corpus.push_back(std::move(record));
  }
  return corpus;
}

namespace {

template <typename MakeBase, typename Perturb>
std::vector<dedup::DedupItem> planted(std::mt19937_64& rng, std::size_t n, MakeBase make_base,
                                      Perturb perturb) {
  std::vector<dedup::DedupItem> items;
  while (items.size() < n) {
    const std::size_t group = std::min<std::size_t>(n - items.size(), 1 + rng() % 5);
    dedup::DedupItem base;
    make_base(base);
    items.push_back(base);
    for (std::size_t k = 1; k < group; ++k) {
      dedup::DedupItem copy = base;
      perturb(copy);
      items.push_back(copy);
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    auto& item = items[i];
    item.id = fmt::format("p{:05d}", order[i]);
    item.source = rng() % 10 == 0 ? Source::crowdsourced : Source::crawled;
    if (rng() % 40 == 0) {
      item.hash.reset();
      item.embedding.reset();
    }
  }
  return items;
}

}  // namespace

std::vector<dedup::DedupItem> planted_hash_items(std::mt19937_64& rng, std::size_t n) {
  return planted(
      rng, n, [&](dedup::DedupItem& item) { item.hash = PerceptualHash{rng()}; },
      [&](dedup::DedupItem& item) {
        const int flips = static_cast<int>(rng() % 12);
        for (int f = 0; f < flips; ++f) item.hash->bits ^= std::uint64_t{1} << (rng() % 64);
      });
}

std::vector<dedup::DedupItem> planted_embedding_items(std::mt19937_64& rng, std::size_t n,
                                                      std::size_t dims) {
  std::uniform_real_distribution<double> closeness(0.95, 0.999);
  return planted(
      rng, n, [&](dedup::DedupItem& item) { item.embedding = random_unit(rng, dims); },
      [&](dedup::DedupItem& item) {
        item.embedding = vector_at_cosine(rng, *item.embedding, closeness(rng));
      });
}

std::vector<qa::ValidationVote> random_votes(std::mt19937_64& rng, const std::string& image_id) {
  const std::size_t n = 1 + rng() % 5;
  std::vector<qa::ValidationVote> votes(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& vote = votes[i];
    vote.validator_id = fmt::format("v{}", i);
    vote.image_id = image_id;
    vote.photo_quality_ok = rng() % 2 == 0;
    vote.relevance = 1 + static_cast<int>(rng() % 5);
    vote.caption_fits = static_cast<qa::CaptionFit>(rng() % 3);
    vote.pii_flag = rng() % 8 == 0;
  }
  return votes;
}

ToyProject write_toy_project(const fs::path& dir, const std::string& base_url) {
  ToyProject project{dir / "pipeline.ini", dir / "served", dir / "out"};
  fs::create_directories(project.served);
  fs::create_directories(dir / "crowd");
  std::vector<Bytes> images;
  for (std::uint64_t seed = 1; seed <= 18; ++seed) {
    images.push_back(image::encode_png(image::synthetic_image(100 + seed, 64, 64)));
  }
  images[13] = images[0];
  images[17] = images[1];

  std::string manifest;
  for (int i = 0; i < 16; ++i) {
    const auto name = fmt::format("w{:02d}.png", i);
    if (i < 14) write_file_atomic(project.served / name, ByteView(images[i]));
    manifest += fmt::format(R"({{"id":"web{:02d}","url":"{}/{}","caption":"photo {}"}})", i,
                            base_url, name, i) +
                "\n";
  }
  write_file_atomic(dir / "manifest.jsonl", manifest);

  std::string crowd;
  for (int i = 0; i < 4; ++i) {
    const auto name = fmt::format("c{}.png", i);
    write_file_atomic(dir / "crowd" / name, ByteView(images[14 + i]));
    crowd +=
        fmt::format(R"({{"id":"crowd{}","file":"{}","caption_en":"market {}","regions":["{}"]}})",
                    i, name, i, i % 2 == 0 ? "VN" : "TH");
    crowd += "\n";
  }
  write_file_atomic(dir / "crowd" / "export.jsonl", crowd);

  embed::ProviderConfig provider_config;
  provider_config.dims = 64;
  auto provider = embed::Provider::create(provider_config);
  ReferenceSet reference;
  reference.provenance = "toy";
  for (int i : {0, 2, 15}) reference.embeddings.push_back(provider->encode(ByteView(images[i])));
  filter::write_reference_file(dir / "reference.bin", reference);

  const std::string ini = fmt::format(R"([pipeline]
seed = 7
output = out
workers = 2

[ingest]
manifest = manifest.jsonl
crowdsource = crowd/export.jsonl
parallelism = 4
timeout_seconds = 5

[embed]
backend = deterministic
dims = 64
cache_dir = cache

[filter]
reference = reference.bin
rho = 0.0
prefilter_floor = -0.2

[calibrate]
per_bucket = 3

[dedup]
method = phash
max_hamming = 8
)");
  write_file_atomic(project.config, ini);
  return project;
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) {
      out[fs::relative(entry.path(), root).generic_string()] = read_file_text(entry.path());
    }
  }
  return out;
}

std::set<oracle::Cluster> as_oracle(const dedup::DedupResult& result) {
  std::set<oracle::Cluster> out;
  for (const auto& cluster : result.clusters) {
    out.insert({{cluster.member_ids.begin(), cluster.member_ids.end()}, cluster.canonical_id});
  }
  return out;
}

}  // namespace curator::testing
