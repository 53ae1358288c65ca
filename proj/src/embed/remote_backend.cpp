#include <httplib.h>

#include <fmt/format.h>
#include <json.hpp>

#include "curator/core/errors.hpp"
#include "curator/embed/provider.hpp"

namespace curator::embed {

using nlohmann::json;

namespace {

std::vector<double> parse_vector(const json& value) {
  if (!value.is_array()) throw ProviderUnavailable("vector is not an array");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_number()) throw ProviderUnavailable("vector entry is not a number");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

RemoteBackend::RemoteBackend(std::string endpoint, double timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
}

std::vector<RawEmbedding> RemoteBackend::embed(std::span<const ByteView> images) {
  std::vector<RawEmbedding> out(images.size());
  if (images.empty()) return out;

  httplib::Client client(endpoint_);
  const auto seconds = static_cast<time_t>(timeout_seconds_);
  const auto micros = static_cast<time_t>((timeout_seconds_ - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);

  // Indices still waiting for a vector. A 422 without vectors for the
  // surviving items triggers one resend of just those items.
  std::vector<std::size_t> pending(images.size());
  for (std::size_t i = 0; i < pending.size(); ++i) pending[i] = i;

  for (int round = 0; round < 2 && !pending.empty(); ++round) {
    json request;
    request["images"] = json::array();
    for (const std::size_t i : pending) request["images"].push_back(base64_encode(images[i]));

    const auto response = client.Post("/v1/embed", request.dump(), "application/json");
    if (!response) {
      throw ProviderUnavailable(fmt::format("embedding service at {} unreachable: {}", endpoint_,
                                            httplib::to_string(response.error())));
    }
    if (response->status != 200 && response->status != 422) {
      throw ProviderUnavailable(
          fmt::format("embedding service answered HTTP {}", response->status));
    }

    json body;
    try {
      body = json::parse(response->body);
    } catch (const json::exception& e) {
      throw ProviderUnavailable(fmt::format("malformed embedding response: {}", e.what()));
    }

    if (response->status == 200) {
      const auto vectors = body.find("vectors");
      if (vectors == body.end() || !vectors->is_array() || vectors->size() != pending.size()) {
        throw ProviderUnavailable("embedding response has the wrong number of vectors");
      }
      for (std::size_t k = 0; k < pending.size(); ++k) {
        out[pending[k]].values = parse_vector((*vectors)[k]);
      }
      return out;
    }

    // 422: per-index errors, indices relative to this request.
    std::vector<bool> failed(pending.size(), false);
    if (const auto it = body.find("errors"); it != body.end() && it->is_array()) {
      for (const auto& entry : *it) {
        if (!entry.is_object() || !entry.contains("index") ||
            !entry["index"].is_number_unsigned()) {
          continue;
        }
        const auto index = entry["index"].get<std::size_t>();
        if (index >= pending.size()) continue;
        failed[index] = true;
        const auto message = entry.find("error");
        out[pending[index]].error = message != entry.end() && message->is_string()
                                        ? message->get<std::string>()
                                        : std::string("rejected by service");
      }
    }
    const auto vectors = body.find("vectors");
    const bool has_vectors =
        vectors != body.end() && vectors->is_array() && vectors->size() == pending.size();
    std::vector<std::size_t> retry;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      if (failed[k]) continue;
      if (has_vectors && !(*vectors)[k].is_null()) {
        out[pending[k]].values = parse_vector((*vectors)[k]);
      } else {
        retry.push_back(pending[k]);
      }
    }
    pending = std::move(retry);
  }
  for (const std::size_t i : pending) out[i].error = "embedding service rejected the batch";
  return out;
}

}  // namespace curator::embed
