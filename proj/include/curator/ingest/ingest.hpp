#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "curator/core/types.hpp"

namespace curator::ingest {

// ---- manifests -------------------------------------------------------------

struct ManifestLoad {
  Corpus records;
  std::size_t skipped = 0;
  std::vector<std::string> diagnostics;  // one per skipped line
};

// Reads a newline-delimited manifest. Each line is a JSON object with a
// required "url" and optional "id", "caption", "regions". Malformed lines are
// skipped and counted. Throws IoError if the file cannot be read and
// EmptyManifestError when no line is valid.
ManifestLoad load_manifest(const std::filesystem::path& path);

// ---- crowdsource exports ---------------------------------------------------

struct CrowdsourceRejection {
  std::size_t line = 0;
  std::string id;
  std::string reason;
};

struct CrowdsourceImport {
  Corpus records;
  std::vector<CrowdsourceRejection> rejected;
};

// Reads a form export (keys id, file, caption_en, caption_native,
// native_language, regions, pii_cleared). `file` is resolved against the
// export's directory. Records missing caption_en or regions are rejected.
CrowdsourceImport import_crowdsource(const std::filesystem::path& export_path);

// ---- fetching --------------------------------------------------------------

enum class FetchFailure { dns, timeout, http_error, not_an_image, too_large };
inline constexpr std::array<FetchFailure, 5> kAllFetchFailures = {
    FetchFailure::dns, FetchFailure::timeout, FetchFailure::http_error, FetchFailure::not_an_image,
    FetchFailure::too_large};

std::string_view to_string(FetchFailure cause);

struct FailedFetch {
  std::string id;
  FetchFailure cause;
  std::string detail;
};

struct FetchReport {
  std::size_t attempted = 0;
  std::size_t succeeded = 0;
  std::array<std::size_t, kAllFetchFailures.size()> failed_by_cause{};
  double elapsed_seconds = 0.0;
  std::vector<FailedFetch> failures;  // sorted by id

  std::size_t failed(FetchFailure cause) const {
    return failed_by_cause[static_cast<std::size_t>(cause)];
  }
  std::size_t total_failed() const;
  // succeeded / attempted, or 0 for an empty run.
  double success_rate() const;
  // succeeded + failures == attempted
  bool consistent() const;
};

// Human-readable rendering with thousands separators and a percentage.
std::string render_fetch_report(const FetchReport& report);

struct FetchOptions {
  std::size_t parallelism = 8;
  double timeout_seconds = 30.0;
  std::size_t max_bytes = 20u << 20;
  std::filesystem::path image_dir;  // where accepted bytes are written
};

// Downloads every record that has a url but no local_path. At most
// `parallelism` transfers are in flight. Accepted bytes must decode as an
// image and fit in max_bytes; they are written to image_dir/<id>.<ext> and
// the record gains local_path. A timeout is retried once. Per-record failures
// land in the report, never as exceptions.
FetchReport fetch_images(Corpus& corpus, const FetchOptions& options);

}  // namespace curator::ingest
