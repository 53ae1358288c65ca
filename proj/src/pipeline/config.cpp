#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "curator/core/errors.hpp"
#include "curator/core/io.hpp"
#include "curator/pipeline/pipeline.hpp"

namespace curator::pipeline {

namespace fs = std::filesystem;

namespace {

struct Field {
  std::function<void(PipelineConfig&, const std::string&, const fs::path&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            std::string_view expected) {
  throw ConfigError(fmt::format("{} = '{}': expected {}", key, value, expected));
}

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  bad_value(key, value, "a boolean");
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used == value.size()) return out;
  } catch (const std::exception&) {
  }
  bad_value(key, value, "a number");
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

std::optional<fs::path> parse_path(const std::string& value, const fs::path& base) {
  if (value.empty()) return std::nullopt;
  fs::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::string show(bool value) {
  return value ? "true" : "false";
}
std::string show(double value) {
  return fmt::format("{}", value);
}
std::string show(std::uint64_t value) {
  return std::to_string(value);
}
std::string show(const std::optional<fs::path>& value) {
  return value ? value->generic_string() : std::string();
}

#define BOOL_FIELD(member)                                         \
  Field {                                                          \
    [](PipelineConfig& c, const std::string& v, const fs::path&) { \
      c.member = parse_bool(#member, v);                           \
    },                                                             \
        [](const PipelineConfig& c) { return show(c.member); }     \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> kFields = {
      {"pipeline.seed",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.seed = parse_unsigned("pipeline.seed", v);
        },
        [](const PipelineConfig& c) { return show(c.seed); }}},
      {"pipeline.output",
       {[](PipelineConfig& c, const std::string& v, const fs::path& base) {
          c.output_dir = parse_path(v, base).value_or(fs::path("curator-out"));
        },
        [](const PipelineConfig& c) { return c.output_dir.generic_string(); }}},
      {"pipeline.workers",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.workers = parse_unsigned("pipeline.workers", v);
        },
        [](const PipelineConfig& c) { return show(std::uint64_t{c.workers}); }}},
      {"stages.ingest", BOOL_FIELD(stages.ingest)},
      {"stages.embed", BOOL_FIELD(stages.embed)},
      {"stages.filter", BOOL_FIELD(stages.filter)},
      {"stages.calibrate", BOOL_FIELD(stages.calibrate)},
      {"stages.dedup", BOOL_FIELD(stages.dedup)},
      {"ingest.manifest",
       {[](PipelineConfig& c, const std::string& v, const fs::path& base) {
          c.manifest = parse_path(v, base);
        },
        [](const PipelineConfig& c) { return show(c.manifest); }}},
      {"ingest.crowdsource",
       {[](PipelineConfig& c, const std::string& v, const fs::path& base) {
          c.crowdsource = parse_path(v, base);
        },
        [](const PipelineConfig& c) { return show(c.crowdsource); }}},
      {"ingest.parallelism",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.fetch.parallelism = parse_unsigned("ingest.parallelism", v);
        },
        [](const PipelineConfig& c) { return show(std::uint64_t{c.fetch.parallelism}); }}},
      {"ingest.timeout_seconds",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.fetch.timeout_seconds = parse_double("ingest.timeout_seconds", v);
        },
        [](const PipelineConfig& c) { return show(c.fetch.timeout_seconds); }}},
      {"ingest.max_bytes",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.fetch.max_bytes = parse_unsigned("ingest.max_bytes", v);
        },
        [](const PipelineConfig& c) { return show(std::uint64_t{c.fetch.max_bytes}); }}},
      {"embed.backend",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          const auto kind = embed::parse_backend_kind(v);
          if (!kind) bad_value("embed.backend", v, "remote or deterministic");
          c.provider.backend = *kind;
        },
        [](const PipelineConfig& c) { return std::string(embed::to_string(c.provider.backend)); }}},
      {"embed.endpoint",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.provider.endpoint = v.empty() ? std::nullopt : std::optional<std::string>(v);
        },
        [](const PipelineConfig& c) { return c.provider.endpoint.value_or(""); }}},
      {"embed.dims",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.provider.dims = parse_unsigned("embed.dims", v);
        },
        [](const PipelineConfig& c) { return show(std::uint64_t{c.provider.dims}); }}},
      {"embed.cache_dir",
       {[](PipelineConfig& c, const std::string& v, const fs::path& base) {
          c.provider.cache_dir = parse_path(v, base).value_or(fs::path());
        },
        [](const PipelineConfig& c) { return c.provider.cache_dir.generic_string(); }}},
      {"embed.batch_size",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.provider.batch_size = parse_unsigned("embed.batch_size", v);
        },
        [](const PipelineConfig& c) { return show(std::uint64_t{c.provider.batch_size}); }}},
      {"embed.timeout_seconds",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.provider.request_timeout_seconds = parse_double("embed.timeout_seconds", v);
        },
        [](const PipelineConfig& c) { return show(c.provider.request_timeout_seconds); }}},
      {"filter.reference",
       {[](PipelineConfig& c, const std::string& v, const fs::path& base) {
          c.reference = parse_path(v, base);
        },
        [](const PipelineConfig& c) { return show(c.reference); }}},
      {"filter.rho",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.rho = parse_double("filter.rho", v);
        },
        [](const PipelineConfig& c) { return show(c.rho); }}},
      {"filter.prefilter_floor",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.prefilter_floor = parse_double("filter.prefilter_floor", v);
        },
        [](const PipelineConfig& c) { return show(c.prefilter_floor); }}},
      {"calibrate.per_bucket",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.per_bucket = parse_unsigned("calibrate.per_bucket", v);
        },
        [](const PipelineConfig& c) { return show(std::uint64_t{c.per_bucket}); }}},
      {"calibrate.target_relevance",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.target_relevance_pct = parse_double("calibrate.target_relevance", v);
        },
        [](const PipelineConfig& c) { return show(c.target_relevance_pct); }}},
      {"calibrate.ratings",
       {[](PipelineConfig& c, const std::string& v, const fs::path& base) {
          c.ratings = parse_path(v, base);
        },
        [](const PipelineConfig& c) { return show(c.ratings); }}},
      {"dedup.method",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          const auto method = dedup::parse_method(v);
          if (!method) bad_value("dedup.method", v, "phash or embedding");
          c.dedup.method = *method;
        },
        [](const PipelineConfig& c) { return std::string(dedup::to_string(c.dedup.method)); }}},
      {"dedup.epsilon",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.dedup.epsilon = parse_double("dedup.epsilon", v);
        },
        [](const PipelineConfig& c) { return show(c.dedup.epsilon); }}},
      {"dedup.max_hamming",
       {[](PipelineConfig& c, const std::string& v, const fs::path&) {
          c.dedup.max_hamming = static_cast<int>(parse_unsigned("dedup.max_hamming", v));
        },
        [](const PipelineConfig& c) { return std::to_string(c.dedup.max_hamming); }}},
      {"report.csv", BOOL_FIELD(report_csv)},
      {"report.text", BOOL_FIELD(report_text)},
  };
  return kFields;
}

#undef BOOL_FIELD

void apply(PipelineConfig& config, const std::string& key, const std::string& value,
           const fs::path& base) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError(fmt::format("unknown setting '{}'", key));
  it->second.set(config, value, base);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> kKeys = [] {
    std::vector<std::string> keys;
    for (const auto& [key, field] : fields()) keys.push_back(key);
    return keys;
  }();
  return kKeys;
}

void PipelineConfig::validate() const {
  if (workers == 0) throw ConfigError("pipeline.workers must be at least 1");
  auto require_file = [](const std::optional<fs::path>& path, std::string_view key) {
    if (!path) throw ConfigError(fmt::format("{} is required by an enabled stage", key));
    if (!fs::exists(*path)) {
      throw ConfigError(fmt::format("{} = {} does not exist", key, path->string()));
    }
  };
  if (stages.ingest) {
    if (!manifest && !crowdsource) {
      throw ConfigError("the ingest stage needs ingest.manifest or ingest.crowdsource");
    }
    if (manifest) require_file(manifest, "ingest.manifest");
    if (crowdsource) require_file(crowdsource, "ingest.crowdsource");
    if (fetch.parallelism == 0) throw ConfigError("ingest.parallelism must be at least 1");
    if (!(fetch.timeout_seconds > 0)) throw ConfigError("ingest.timeout_seconds must be positive");
  }
  if (stages.embed || stages.filter || (stages.dedup && dedup.method == dedup::Method::embedding)) {
    provider.validate();
  }
  if (stages.filter) {
    require_file(reference, "filter.reference");
    if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError("filter.rho must lie in [-1, 1]");
    if (prefilter_floor > rho) throw ConfigError("filter.prefilter_floor must not exceed rho");
  }
  if (stages.calibrate && stages.filter) {
    if (per_bucket == 0) throw ConfigError("calibrate.per_bucket must be at least 1");
    if (ratings) require_file(ratings, "calibrate.ratings");
  }
  if (stages.dedup) dedup.validate();
}

PipelineConfig parse_pipeline_config(std::string_view ini_text,
                                     std::span<const std::string> overrides,
                                     const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(ini_text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  PipelineConfig config;
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) {
      throw ConfigError(fmt::format("setting '{}' must sit inside a section", section));
    }
    for (const auto& [key, value] : entries) {
      apply(config, section + "." + key, value.data(), base_dir);
    }
  }
  for (std::string override_text : overrides) {
    if (override_text.rfind("--", 0) == 0) override_text.erase(0, 2);
    const auto eq = override_text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("override '{}' is not key=value", override_text));
    }
    apply(config, override_text.substr(0, eq), override_text.substr(eq + 1), fs::path());
  }
  return config;
}

PipelineConfig load_pipeline_config(const fs::path& path, std::span<const std::string> overrides) {
  return parse_pipeline_config(read_file_text(path), overrides, path.parent_path());
}

std::string canonical_config(const PipelineConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += fmt::format("{}={}\n", key, field.get(config));
  return out;
}

}  // namespace curator::pipeline
