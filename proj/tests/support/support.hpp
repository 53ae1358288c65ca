#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "curator/core/types.hpp"
#include "curator/dedup/dedup.hpp"
#include "curator/image/codec.hpp"
#include "curator/qa/qa.hpp"
#include "oracles.hpp"

namespace curator::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::filesystem::path& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// httplib server on a background thread bound to a free loopback port.
class LocalServer {
 public:
  LocalServer();
  ~LocalServer();

  httplib::Server& server() { return server_; }
  // Binds and starts serving; returns the port.
  int start();
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

std::vector<double> random_gaussian(std::mt19937_64& rng, std::size_t dims);
EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dims);

// A unit vector whose cosine with the unit vector `base` is exactly `target`
// (up to float rounding), built from a random orthogonal direction.
EmbeddingVector vector_at_cosine(std::mt19937_64& rng, const EmbeddingVector& base, double target);

// Writes `count` synthetic PNGs (seeds seed0 .. seed0+count-1) into
// dir/images and returns crawled records pointing at them, ids "img0000"...
Corpus write_synthetic_corpus(const std::filesystem::path& dir, std::size_t count,
                              std::uint64_t seed0 = 1, int side = 64);

// Feature-level corpora with planted near-duplicate groups: each group is a
// random base feature plus perturbed copies (a few flipped bits, or vectors
// at cosine 0.95-0.999 to the base). About a tenth of the items are
// crowdsourced and one in forty lacks its feature. Ids are shuffled so that
// group members are not adjacent.
std::vector<dedup::DedupItem> planted_hash_items(std::mt19937_64& rng, std::size_t n);
std::vector<dedup::DedupItem> planted_embedding_items(std::mt19937_64& rng, std::size_t n,
                                                      std::size_t dims = 24);

// Between one and five votes on `image_id` from distinct validators with
// uniformly random fields.
std::vector<qa::ValidationVote> random_votes(std::mt19937_64& rng, const std::string& image_id);

// A 20-record pipeline project under `dir`: 16 manifest URLs below
// `base_url` (14 served from dir/served, two dead), 4 crowdsourced files,
// two byte-identical copies, a reference set built from three of the images
// and pipeline.ini. Serve dir/served at `base_url` before running it.
struct ToyProject {
  std::filesystem::path config;
  std::filesystem::path served;
  std::filesystem::path output;
};
ToyProject write_toy_project(const std::filesystem::path& dir, const std::string& base_url);

// Relative path -> contents for every regular file below `root`.
std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root);

// Library clusters in the oracle's shape.
std::set<oracle::Cluster> as_oracle(const dedup::DedupResult& result);

}  // namespace curator::testing
