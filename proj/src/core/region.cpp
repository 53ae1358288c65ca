#include "curator/core/region.hpp"

#include <cctype>

namespace curator {
namespace {

struct RegionInfo {
  Region region;
  std::string_view code;
  std::string_view name;
};

constexpr std::array<RegionInfo, 11> kRegionTable = {{
    {Region::BN, "BN", "Brunei"},
    {Region::KH, "KH", "Cambodia"},
    {Region::ID, "ID", "Indonesia"},
    {Region::LA, "LA", "Laos"},
    {Region::MY, "MY", "Malaysia"},
    {Region::MM, "MM", "Myanmar"},
    {Region::PH, "PH", "Philippines"},
    {Region::SG, "SG", "Singapore"},
    {Region::TH, "TH", "Thailand"},
    {Region::TL, "TL", "Timor-Leste"},
    {Region::VN, "VN", "Vietnam"},
}};

}  // namespace

std::string_view region_code(Region region) {
  return kRegionTable[static_cast<std::size_t>(region)].code;
}

std::string_view region_name(Region region) {
  return kRegionTable[static_cast<std::size_t>(region)].name;
}

std::optional<Region> parse_region(std::string_view code) {
  if (code.size() != 2) return std::nullopt;
  const char upper[2] = {static_cast<char>(std::toupper(static_cast<unsigned char>(code[0]))),
                         static_cast<char>(std::toupper(static_cast<unsigned char>(code[1])))};
  for (const auto& info : kRegionTable) {
    if (info.code == std::string_view(upper, 2)) return info.region;
  }
  return std::nullopt;
}

}  // namespace curator
