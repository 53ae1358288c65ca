#pragma once

#include <filesystem>

#include <json.hpp>

#include "curator/core/types.hpp"

namespace curator {

// Newline-delimited JSON serialisation of ImageRecord. Field names follow the
// struct; absent optionals are omitted.
nlohmann::json record_to_json(const ImageRecord& record);
// Throws ParseError on schema violations.
ImageRecord record_from_json(const nlohmann::json& value);

// A corpus directory holds `records.jsonl` plus an `images/` folder. Local
// paths inside the directory are stored relative to it.
inline constexpr const char* kRecordsFile = "records.jsonl";

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);

std::filesystem::path corpus_image_dir(const std::filesystem::path& dir);

}  // namespace curator
