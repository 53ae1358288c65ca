#include "curator/core/format.hpp"

#include <cmath>

#include <fmt/format.h>

namespace curator {

std::string with_thousands(std::uint64_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  out.reserve(digits.size() + digits.size() / 3);
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (i + 3 - lead) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string two_decimals(double value) {
  // Decide on the shortest decimal representation first so that values such
  // as 2.675 (stored as 2.67499999...) round the way they are printed.
  const double shortest = std::stod(fmt::format("{}", value));
  const double scaled = std::round(shortest * 100.0 + (shortest >= 0 ? 1e-9 : -1e-9));
  return fmt::format("{:.2f}", scaled / 100.0);
}

}  // namespace curator
