#include "curator/embed/provider.hpp"

#include <bit>
#include <cstring>
#include <random>

#include <fmt/format.h>

#include "curator/core/errors.hpp"
#include "curator/image/codec.hpp"

namespace curator::embed {

namespace fs = std::filesystem;

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::remote ? "remote" : "deterministic";
}

std::optional<BackendKind> parse_backend_kind(std::string_view text) {
  if (text == "remote") return BackendKind::remote;
  if (text == "deterministic") return BackendKind::deterministic;
  return std::nullopt;
}

void ProviderConfig::validate() const {
  if (dims < 2) throw ConfigError("embedding dims must be at least 2");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (backend == BackendKind::remote && (!endpoint || endpoint->empty())) {
    throw ConfigError("remote backend needs an endpoint");
  }
  if (backend != BackendKind::remote && endpoint) {
    throw ConfigError("endpoint is only valid for the remote backend");
  }
}

// ---- deterministic backend -------------------------------------------------

std::vector<double> DeterministicBackend::raw_vector(ByteView image, std::size_t dims) {
  std::mt19937_64 rng(digest64(image));
  std::vector<double> values(dims);
  for (auto& v : values) {
    // 53 random mantissa bits -> [0, 1) -> [-1, 1)
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = 2.0 * unit - 1.0;
  }
  return values;
}

std::vector<RawEmbedding> DeterministicBackend::embed(std::span<const ByteView> images) {
  std::vector<RawEmbedding> out;
  out.reserve(images.size());
  for (const auto image : images) out.push_back({raw_vector(image, dims_), {}});
  return out;
}

// ---- cache -----------------------------------------------------------------

EmbeddingCache::EmbeddingCache(fs::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) fs::create_directories(dir_);
}

std::string EmbeddingCache::key(ByteView image, std::string_view backend_id, std::size_t dims) {
  const auto content = sha256(image);
  std::string material(reinterpret_cast<const char*>(content.data()), content.size());
  material.push_back('\0');
  material.append(backend_id);
  material.push_back('\0');
  material.append(std::to_string(dims));
  return sha256_hex(as_bytes(material));
}

std::optional<std::vector<float>> EmbeddingCache::load(const std::string& key,
                                                       std::size_t dims) const {
  if (!enabled()) return std::nullopt;
  const auto path = dir_ / key;
  std::error_code ec;
  if (fs::file_size(path, ec) != dims * sizeof(float) || ec) return std::nullopt;
  Bytes raw;
  try {
    raw = read_file_bytes(path);
  } catch (const IoError&) {
    return std::nullopt;
  }
  if (raw.size() != dims * sizeof(float)) return std::nullopt;
  std::vector<float> values(dims);
  for (std::size_t i = 0; i < dims; ++i) {
    std::uint32_t word = 0;
    for (int b = 3; b >= 0; --b) word = (word << 8) | raw[i * 4 + static_cast<std::size_t>(b)];
    values[i] = std::bit_cast<float>(word);
  }
  return values;
}

void EmbeddingCache::store(const std::string& key, std::span<const float> values) const {
  if (!enabled()) return;
  Bytes raw(values.size() * sizeof(float));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto word = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) raw[i * 4 + static_cast<std::size_t>(b)] = (word >> (8 * b)) & 0xFF;
  }
  write_file_atomic(dir_ / key, raw);
}

// ---- provider --------------------------------------------------------------

Provider::Provider(ProviderConfig config, std::unique_ptr<Backend> backend)
    : config_(std::move(config)), backend_(std::move(backend)), cache_(config_.cache_dir) {
  config_.validate();
  if (!backend_) throw ConfigError("provider needs a backend");
}

std::unique_ptr<Provider> Provider::create(const ProviderConfig& config) {
  config.validate();
  std::unique_ptr<Backend> backend;
  if (config.backend == BackendKind::remote) {
    backend = std::make_unique<RemoteBackend>(*config.endpoint, config.request_timeout_seconds);
  } else {
    backend = std::make_unique<DeterministicBackend>(config.dims);
  }
  return std::make_unique<Provider>(config, std::move(backend));
}

EmbeddingVector Provider::encode(ByteView image) {
  const ByteView one[] = {image};
  auto results = encode_batch(one, 1);
  auto& result = results.front();
  if (result.ok()) return std::move(*result.vector);
  if (result.decode_failed) throw DecodeError(result.error);
  if (result.unavailable) throw ProviderUnavailable(result.error);
  throw Error(result.error);
}

std::vector<EncodeResult> Provider::encode_batch(std::span<const ByteView> images,
                                                 std::size_t batch_size) {
  if (batch_size == 0) batch_size = config_.batch_size;
  const std::string backend_id = backend_->id();
  std::vector<EncodeResult> results(images.size());
  std::vector<std::string> keys(images.size());
  std::vector<std::size_t> misses;

  for (std::size_t i = 0; i < images.size(); ++i) {
    keys[i] = EmbeddingCache::key(images[i], backend_id, config_.dims);
    if (auto cached = cache_.load(keys[i], config_.dims)) {
      try {
        results[i].vector = EmbeddingVector::from_unit(std::move(*cached));
        continue;
      } catch (const NormalizationError&) {
        // corrupt entry: recompute below
      }
    }
    if (!image::is_decodable(images[i])) {
      results[i].error = "bytes do not decode as an image";
      results[i].decode_failed = true;
      continue;
    }
    misses.push_back(i);
  }

  for (std::size_t start = 0; start < misses.size(); start += batch_size) {
    const std::size_t end = std::min(misses.size(), start + batch_size);
    std::vector<ByteView> chunk;
    chunk.reserve(end - start);
    for (std::size_t k = start; k < end; ++k) chunk.push_back(images[misses[k]]);

    std::vector<RawEmbedding> raw;
    try {
      ++backend_calls_;
      raw = backend_->embed(chunk);
      if (raw.size() != chunk.size()) {
        throw ProviderUnavailable(
            fmt::format("backend returned {} results for {} images", raw.size(), chunk.size()));
      }
    } catch (const ProviderUnavailable& e) {
      for (std::size_t k = start; k < end; ++k) {
        results[misses[k]].error = e.what();
        results[misses[k]].unavailable = true;
      }
      continue;
    }

    for (std::size_t k = start; k < end; ++k) {
      const std::size_t index = misses[k];
      auto& answer = raw[k - start];
      auto& result = results[index];
      if (!answer.ok()) {
        result.error = answer.error;
        continue;
      }
      if (answer.values.size() != config_.dims) {
        result.error = fmt::format("backend returned {} dims, expected {}", answer.values.size(),
                                   config_.dims);
        continue;
      }
      try {
        result.vector = normalize(std::span<const double>(answer.values));
        cache_.store(keys[index], result.vector->values());
      } catch (const NormalizationError& e) {
        result.error = e.what();
      }
    }
  }
  return results;
}

}  // namespace curator::embed
