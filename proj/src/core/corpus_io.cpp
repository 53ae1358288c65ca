#include "curator/core/corpus_io.hpp"

#include <fmt/format.h>

#include "curator/core/errors.hpp"
#include "curator/core/io.hpp"

namespace curator {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void put(json& out, const char* key, const std::optional<T>& value) {
  if (value) out[key] = *value;
}

std::optional<std::string> get_string(const json& in, const char* key) {
  const auto it = in.find(key);
  if (it == in.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(fmt::format("field '{}' must be a string", key));
  return it->get<std::string>();
}

}  // namespace

json record_to_json(const ImageRecord& record) {
  json out;
  out["id"] = record.id;
  out["source"] = to_string(record.source);
  put(out, "url", record.url);
  if (record.local_path) out["local_path"] = record.local_path->generic_string();
  put(out, "caption_en", record.caption_en);
  put(out, "caption_native", record.caption_native);
  put(out, "native_language", record.native_language);
  json regions = json::array();
  for (const Region r : record.regions) regions.push_back(region_code(r));
  out["regions"] = std::move(regions);
  put(out, "similarity_score", record.similarity_score);
  if (record.bucket) out["bucket"] = to_string(*record.bucket);
  put(out, "cluster_id", record.cluster_id);
  out["pii_cleared"] = record.pii_cleared;
  return out;
}

ImageRecord record_from_json(const json& in) {
  if (!in.is_object()) throw ParseError("record is not an object");
  ImageRecord record;
  record.id = get_string(in, "id").value_or("");
  if (!is_valid_record_id(record.id)) throw ParseError(fmt::format("invalid id '{}'", record.id));
  const auto source = parse_source(get_string(in, "source").value_or("crawled"));
  if (!source) throw ParseError("unknown source");
  record.source = *source;
  record.url = get_string(in, "url");
  if (auto p = get_string(in, "local_path")) record.local_path = fs::path(*p);
  record.caption_en = get_string(in, "caption_en");
  record.caption_native = get_string(in, "caption_native");
  record.native_language = get_string(in, "native_language");
  if (const auto it = in.find("regions"); it != in.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError("regions must be an array");
    for (const auto& code : *it) {
      const auto region = code.is_string() ? parse_region(code.get<std::string>()) : std::nullopt;
      if (!region) throw ParseError(fmt::format("unknown region {}", code.dump()));
      record.regions.insert(*region);
    }
  }
  if (const auto it = in.find("similarity_score"); it != in.end() && !it->is_null()) {
    if (!it->is_number()) throw ParseError("similarity_score must be a number");
    record.similarity_score = it->get<double>();
  }
  if (auto b = get_string(in, "bucket")) {
    record.bucket = parse_bucket_label(*b);
    if (!record.bucket) throw ParseError(fmt::format("unknown bucket '{}'", *b));
  }
  record.cluster_id = get_string(in, "cluster_id");
  if (const auto it = in.find("pii_cleared"); it != in.end() && !it->is_null()) {
    if (!it->is_boolean()) throw ParseError("pii_cleared must be a boolean");
    record.pii_cleared = it->get<bool>();
  }
  return record;
}

fs::path corpus_image_dir(const fs::path& dir) {
  return dir / "images";
}

void write_corpus(const fs::path& dir, const Corpus& corpus) {
  fs::create_directories(dir);
  const auto base = fs::weakly_canonical(dir);
  std::string text;
  for (const auto& record : corpus) {
    ImageRecord stored = record;
    if (stored.local_path && stored.local_path->is_absolute()) {
      const auto rel = fs::weakly_canonical(*stored.local_path).lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") stored.local_path = rel;
    }
    text += record_to_json(stored).dump();
    text += '\n';
  }
  write_file_atomic(dir / kRecordsFile, text);
}

Corpus read_corpus(const fs::path& dir) {
  const auto file = dir / kRecordsFile;
  if (!fs::exists(file)) throw IoError(fmt::format("no corpus at {}", dir.string()));
  const auto base = fs::absolute(dir);
  Corpus corpus;
  for_each_line(file, [&](std::size_t number, std::string_view line) {
    if (line.empty()) return;
    try {
      auto record = record_from_json(json::parse(line));
      if (record.local_path && record.local_path->is_relative()) {
        record.local_path = (base / *record.local_path).lexically_normal();
      }
      corpus.push_back(std::move(record));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", file.string(), number, e.what()));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", file.string(), number, e.what()));
    }
  });
  return corpus;
}

}  // namespace curator
