#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curator/dedup/dedup.hpp"
#include "curator/embed/provider.hpp"
#include "curator/filter/filter.hpp"
#include "curator/ingest/ingest.hpp"

namespace curator::pipeline {

// Fixed stage order. `survivors` and `reports` always run when reached.
inline constexpr std::string_view kStageOrder[] = {"ingest", "embed",     "filter", "calibrate",
                                                   "dedup",  "survivors", "reports"};

struct StageToggles {
  bool ingest = true;
  bool embed = true;
  bool filter = true;
  bool calibrate = true;
  bool dedup = true;
};

struct PipelineConfig {
  std::uint64_t seed = 0;  // every random draw derives from this
  std::filesystem::path output_dir = "curator-out";
  std::size_t workers = 1;
  StageToggles stages;

  // ingest
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> crowdsource;
  ingest::FetchOptions fetch;  // image_dir is set by the run

  embed::ProviderConfig provider;

  // filter
  std::optional<std::filesystem::path> reference;
  double rho = 0.545;
  double prefilter_floor = 0.515;

  // calibrate
  std::size_t per_bucket = 50;
  double target_relevance_pct = 85.0;
  std::optional<std::filesystem::path> ratings;

  dedup::DedupConfig dedup;

  bool report_csv = true;
  bool report_text = true;

  // Input paths exist for enabled stages, numeric settings in range.
  // Throws ConfigError.
  void validate() const;
};

// Flat INI text: [pipeline], [stages], [ingest], [embed], [filter],
// [calibrate], [dedup], [report] sections of key = value lines. Overrides are
// "section.key=value" strings (a leading "--" is accepted) applied on top.
// Relative paths resolve against `base_dir`. Unknown keys are a ConfigError.
PipelineConfig parse_pipeline_config(std::string_view ini_text,
                                     std::span<const std::string> overrides = {},
                                     const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path,
                                    std::span<const std::string> overrides = {});

// The recognised "section.key" names.
const std::vector<std::string>& config_keys();

// Canonical text of every setting; equal configs give equal text.
std::string canonical_config(const PipelineConfig& config);

struct RunSummary {
  std::size_t ingested = 0;
  std::size_t fetched = 0;
  std::size_t scored = 0;
  std::size_t retained = 0;
  std::size_t clusters = 0;
  std::size_t survivors = 0;
  std::vector<std::string> resumed;   // stages restored from checkpoints
  std::vector<std::string> executed;  // stages run in this invocation

  // survivors <= retained <= fetched <= ingested
  bool monotone() const;
};

std::string summary_csv(const RunSummary& summary);
std::string render_summary(const RunSummary& summary);

struct PipelineHooks {
  // Called at named points inside stages ("dedup", "features"), after the
  // stage's inputs are loaded and before its checkpoint is written.
  std::function<void(std::string_view stage, std::string_view step)> on_step;
};

// Runs the enabled stages in order. Each stage writes its artifacts and then
// a checkpoint under output_dir/checkpoints; a later run with the same
// configuration restores completed stages instead of recomputing them. A
// failing stage raises StageError and leaves earlier checkpoints intact.
RunSummary run_pipeline(const PipelineConfig& config, const PipelineHooks& hooks = {});

// Output layout.
std::filesystem::path reports_dir(const PipelineConfig& config);
std::filesystem::path checkpoints_dir(const PipelineConfig& config);

}  // namespace curator::pipeline
