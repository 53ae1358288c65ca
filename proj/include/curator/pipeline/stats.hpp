#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curator/core/types.hpp"
#include "curator/qa/qa.hpp"

namespace curator::pipeline {

struct RegionStats {
  Region region = Region::ID;
  std::size_t accepted = 0;
  std::optional<double> mean_relevance;  // empty when nothing was accepted
};

// Statistics of accepted (overall True) crowdsourced images. Relevance is the
// per-image average score; an image counts once in every region it is tagged
// with and once in the overall figures.
struct DatasetStats {
  std::vector<RegionStats> regions;  // all eleven regions, fixed order
  std::size_t accepted = 0;
  double validators_per_image = 0.0;
  double mean_relevance = 0.0;
  double median_relevance = 0.0;
  double std_relevance = 0.0;  // sample standard deviation, 0 for fewer than 2
};

// `corpus` supplies the region tags by image id; accepted images missing from
// it still count in the overall figures.
DatasetStats dataset_stats(const Corpus& corpus, std::span<const qa::QAVerdict> verdicts);

std::string dataset_stats_csv(const DatasetStats& stats);
std::string render_dataset_stats(const DatasetStats& stats);

}  // namespace curator::pipeline
