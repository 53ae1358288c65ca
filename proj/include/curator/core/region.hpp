#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace curator {

// The eleven Southeast Asian countries covered by the corpus, keyed by their
// ISO 3166-1 alpha-2 codes.
enum class Region : std::uint8_t { BN, KH, ID, LA, MY, MM, PH, SG, TH, TL, VN };

inline constexpr std::array<Region, 11> kAllRegions = {
    Region::BN, Region::KH, Region::ID, Region::LA, Region::MY, Region::MM,
    Region::PH, Region::SG, Region::TH, Region::TL, Region::VN};

using RegionSet = std::set<Region>;

std::string_view region_code(Region region);
std::string_view region_name(Region region);

// Accepts upper- or lower-case two-letter codes.
std::optional<Region> parse_region(std::string_view code);

}  // namespace curator
