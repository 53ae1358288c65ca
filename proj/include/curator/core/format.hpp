#pragma once

#include <cstdint>
#include <string>

namespace curator {

// 1234567 -> "1,234,567"
std::string with_thousands(std::uint64_t value);

// Fixed two-decimal rendering with round-half-away-from-zero on the decimal
// value nearest to `value`, e.g. 2.675 -> "2.68".
std::string two_decimals(double value);

}  // namespace curator
