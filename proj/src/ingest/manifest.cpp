#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "curator/core/errors.hpp"
#include "curator/core/io.hpp"
#include "curator/ingest/ingest.hpp"

namespace curator::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RegionSet parse_regions(const json& value) {
  if (!value.is_array()) throw ParseError("regions must be an array");
  RegionSet regions;
  for (const auto& code : value) {
    const auto region = code.is_string() ? parse_region(code.get<std::string>()) : std::nullopt;
    if (!region) throw ParseError(fmt::format("unknown region {}", code.dump()));
    regions.insert(*region);
  }
  return regions;
}

std::optional<std::string> optional_string(const json& object, const char* key) {
  const auto it = object.find(key);
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(fmt::format("'{}' must be a string", key));
  return it->get<std::string>();
}

}  // namespace

ManifestLoad load_manifest(const fs::path& path) {
  ManifestLoad load;
  std::set<std::string> seen;
  for_each_line(path, [&](std::size_t number, std::string_view line) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    try {
      const auto object = json::parse(line);
      if (!object.is_object()) throw ParseError("line is not an object");
      const auto url = optional_string(object, "url");
      if (!url || url->empty()) throw ParseError("missing url");

      ImageRecord record;
      record.source = Source::crawled;
      record.url = *url;
      record.id =
          optional_string(object, "id").value_or("u" + sha256_hex(as_bytes(*url)).substr(0, 16));
      if (!is_valid_record_id(record.id)) {
        throw ParseError(fmt::format("invalid id '{}'", record.id));
      }
      if (!seen.insert(record.id).second) {
        throw ParseError(fmt::format("duplicate id '{}'", record.id));
      }
      record.caption_en = optional_string(object, "caption");
      if (const auto it = object.find("regions"); it != object.end() && !it->is_null()) {
        record.regions = parse_regions(*it);
      }
      load.records.push_back(std::move(record));
    } catch (const json::exception& e) {
      ++load.skipped;
      load.diagnostics.push_back(fmt::format("line {}: {}", number, e.what()));
    } catch (const ParseError& e) {
      ++load.skipped;
      load.diagnostics.push_back(fmt::format("line {}: {}", number, e.what()));
    }
  });
  if (load.records.empty()) {
    throw EmptyManifestError(
        fmt::format("{} has no valid records ({} malformed)", path.string(), load.skipped));
  }
  return load;
}

CrowdsourceImport import_crowdsource(const fs::path& export_path) {
  CrowdsourceImport result;
  const auto base = fs::absolute(export_path).parent_path();
  std::set<std::string> seen;
  for_each_line(export_path, [&](std::size_t number, std::string_view line) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    std::string id;
    try {
      const auto object = json::parse(line);
      if (!object.is_object()) throw ParseError("line is not an object");
      id = optional_string(object, "id").value_or("");
      if (!is_valid_record_id(id)) throw ParseError(fmt::format("invalid id '{}'", id));
      if (seen.count(id)) throw ParseError("duplicate id");

      ImageRecord record;
      record.id = id;
      record.source = Source::crowdsourced;
      const auto file = optional_string(object, "file");
      if (!file || file->empty()) throw ParseError("missing file");
      const fs::path file_path(*file);
      record.local_path =
          (file_path.is_absolute() ? file_path : base / file_path).lexically_normal();

      record.caption_en = optional_string(object, "caption_en");
      if (!record.caption_en || record.caption_en->empty()) throw ParseError("missing caption_en");
      record.caption_native = optional_string(object, "caption_native");
      record.native_language = optional_string(object, "native_language");

      const auto regions = object.find("regions");
      if (regions == object.end() || regions->is_null()) throw ParseError("missing regions");
      record.regions = parse_regions(*regions);
      if (record.regions.empty()) throw ParseError("regions is empty");

      if (const auto it = object.find("pii_cleared"); it != object.end() && !it->is_null()) {
        if (!it->is_boolean()) throw ParseError("pii_cleared must be a boolean");
        record.pii_cleared = it->get<bool>();
      }
      seen.insert(id);
      result.records.push_back(std::move(record));
    } catch (const json::exception& e) {
      result.rejected.push_back({number, id, e.what()});
    } catch (const ParseError& e) {
      result.rejected.push_back({number, id, e.what()});
    }
  });
  return result;
}

}  // namespace curator::ingest
