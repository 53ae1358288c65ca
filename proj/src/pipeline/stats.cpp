#include "curator/pipeline/stats.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "curator/core/format.hpp"

namespace curator::pipeline {

DatasetStats dataset_stats(const Corpus& corpus, std::span<const qa::QAVerdict> verdicts) {
  std::unordered_map<std::string, const ImageRecord*> by_id;
  for (const auto& record : corpus) by_id.emplace(record.id, &record);

  std::array<double, kAllRegions.size()> sums{};
  std::array<std::size_t, kAllRegions.size()> counts{};
  std::vector<double> relevance;
  std::size_t validators = 0;
  for (const auto& verdict : verdicts) {
    if (verdict.overall != qa::Tri::True) continue;
    relevance.push_back(verdict.averages.relevance);
    validators += verdict.n_validators;
    const auto it = by_id.find(verdict.image_id);
    if (it == by_id.end()) continue;
    for (const Region region : it->second->regions) {
      const auto index = static_cast<std::size_t>(region);
      sums[index] += verdict.averages.relevance;
      ++counts[index];
    }
  }

  DatasetStats stats;
  for (const Region region : kAllRegions) {
    const auto index = static_cast<std::size_t>(region);
    RegionStats row;
    row.region = region;
    row.accepted = counts[index];
    if (counts[index] > 0) row.mean_relevance = sums[index] / static_cast<double>(counts[index]);
    stats.regions.push_back(row);
  }
  stats.accepted = relevance.size();
  if (relevance.empty()) return stats;

  const auto n = static_cast<double>(relevance.size());
  stats.validators_per_image = static_cast<double>(validators) / n;
  double sum = 0.0;
  for (const double r : relevance) sum += r;
  stats.mean_relevance = sum / n;
  std::sort(relevance.begin(), relevance.end());
  const std::size_t mid = relevance.size() / 2;
  stats.median_relevance =
      relevance.size() % 2 == 1 ? relevance[mid] : (relevance[mid - 1] + relevance[mid]) / 2.0;
  if (relevance.size() > 1) {
    double squares = 0.0;
    for (const double r : relevance)
      squares += (r - stats.mean_relevance) * (r - stats.mean_relevance);
    stats.std_relevance = std::sqrt(squares / (n - 1.0));
  }
  return stats;
}

std::string dataset_stats_csv(const DatasetStats& stats) {
  std::string out = "region,accepted,mean_relevance\n";
  for (const auto& row : stats.regions) {
    out += fmt::format("{},{},{}\n", region_name(row.region), row.accepted,
                       row.mean_relevance ? two_decimals(*row.mean_relevance) : "");
  }
  out += fmt::format("overall,{},{}\n", stats.accepted,
                     stats.accepted > 0 ? two_decimals(stats.mean_relevance) : "");
  return out;
}

std::string render_dataset_stats(const DatasetStats& stats) {
  std::string out = "Overall\n";
  out += fmt::format("  {:<26} {:>8}\n", "# Data", with_thousands(stats.accepted));
  out += fmt::format("  {:<26} {:>8.1f}\n", "# Validator per data", stats.validators_per_image);
  out += fmt::format("  {:<26} {:>8}\n", "Relevance median", two_decimals(stats.median_relevance));
  out += fmt::format("  {:<26} {:>8}\n", "Relevance avg.", two_decimals(stats.mean_relevance));
  out += fmt::format("  {:<26} {:>8}\n", "Relevance std.", two_decimals(stats.std_relevance));
  out += "Per region (an image can count for more than one region)\n";
  out += fmt::format("  {:<26} {:>8} {:>15}\n", "Country", "# Data", "Avg. relevance");
  for (const auto& row : stats.regions) {
    out += fmt::format("  {:<26} {:>8} {:>15}\n", region_name(row.region),
                       with_thousands(row.accepted),
                       row.mean_relevance ? two_decimals(*row.mean_relevance) : "-");
  }
  return out;
}

}  // namespace curator::pipeline
