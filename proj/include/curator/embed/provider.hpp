#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curator/core/io.hpp"
#include "curator/core/types.hpp"

namespace curator::embed {

enum class BackendKind { remote, deterministic };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view text);

struct ProviderConfig {
  BackendKind backend = BackendKind::deterministic;
  std::optional<std::string> endpoint;  // base URL, e.g. http://127.0.0.1:9000
  std::size_t dims = 512;
  std::filesystem::path cache_dir;  // empty disables the cache
  std::size_t batch_size = 32;
  double request_timeout_seconds = 60.0;

  // endpoint iff remote; dims >= 2; batch_size >= 1. Throws ConfigError.
  void validate() const;
};

// One backend answer: raw (not necessarily normalised) values, or an error.
struct RawEmbedding {
  std::vector<double> values;
  std::string error;

  bool ok() const { return error.empty(); }
};

// The pluggable encoding function. Implementations receive images already
// verified to decode. They throw ProviderUnavailable for transport failures
// and report per-image problems through RawEmbedding::error.
class Backend {
 public:
  virtual ~Backend() = default;
  // Stable identifier; part of the cache key.
  virtual std::string id() const = 0;
  virtual std::vector<RawEmbedding> embed(std::span<const ByteView> images) = 0;
};

// Seeds a 64-bit Mersenne Twister with the first eight SHA-256 bytes of the
// image and draws `dims` values uniformly from [-1, 1).
class DeterministicBackend final : public Backend {
 public:
  explicit DeterministicBackend(std::size_t dims) : dims_(dims) {}
  std::string id() const override { return "deterministic-v1"; }
  std::vector<RawEmbedding> embed(std::span<const ByteView> images) override;

  static std::vector<double> raw_vector(ByteView image, std::size_t dims);

 private:
  std::size_t dims_;
};

// Talks to an inference service:
//   POST /v1/embed {"images": [base64...]}
//   200 {"vectors": [[...]...], "dims": n}
//   422 {"errors": [{"index": i, "error": "..."}...], "vectors": [... or null]}
class RemoteBackend final : public Backend {
 public:
  RemoteBackend(std::string endpoint, double timeout_seconds);
  std::string id() const override { return "remote:" + endpoint_; }
  std::vector<RawEmbedding> embed(std::span<const ByteView> images) override;

 private:
  std::string endpoint_;
  double timeout_seconds_;
};

// One file per key, holding little-endian float32 values. Writes go through
// a temporary and rename so concurrent writers of the same key are safe.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  bool enabled() const { return !dir_.empty(); }
  static std::string key(ByteView image, std::string_view backend_id, std::size_t dims);
  std::optional<std::vector<float>> load(const std::string& key, std::size_t dims) const;
  void store(const std::string& key, std::span<const float> values) const;

 private:
  std::filesystem::path dir_;
};

struct EncodeResult {
  std::optional<EmbeddingVector> vector;
  std::string error;
  bool decode_failed = false;
  bool unavailable = false;

  bool ok() const { return vector.has_value(); }
};

class Provider {
 public:
  Provider(ProviderConfig config, std::unique_ptr<Backend> backend);

  // Builds the backend named by config.backend.
  static std::unique_ptr<Provider> create(const ProviderConfig& config);

  // Throws DecodeError for bytes that are not an image and
  // ProviderUnavailable when the backend cannot be reached.
  EmbeddingVector encode(ByteView image);

  // Order-preserving. Failures are reported per index; successful items are
  // returned regardless. batch_size 0 means config.batch_size.
  std::vector<EncodeResult> encode_batch(std::span<const ByteView> images,
                                         std::size_t batch_size = 0);

  std::size_t dims() const { return config_.dims; }
  const ProviderConfig& config() const { return config_; }
  std::string backend_id() const { return backend_->id(); }
  // Number of Backend::embed invocations so far.
  std::size_t backend_calls() const { return backend_calls_.load(); }

 private:
  ProviderConfig config_;
  std::unique_ptr<Backend> backend_;
  EmbeddingCache cache_;
  std::atomic<std::size_t> backend_calls_{0};
};

}  // namespace curator::embed
