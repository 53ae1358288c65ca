#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace curator {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

Bytes read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

// Writes to a sibling temporary and renames over `path`, so readers observe
// either the previous content or the complete new content.
void write_file_atomic(const std::filesystem::path& path, ByteView data);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

// Calls `visit(line_number, line)` for each line (1-based), stripping a
// trailing '\r'. Blank lines are passed through.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& visit);

// SHA-256 of `data`.
std::array<std::uint8_t, 32> sha256(ByteView data);
std::string sha256_hex(ByteView data);
// First eight digest bytes read as a little-endian integer.
std::uint64_t digest64(ByteView data);

std::string to_hex(ByteView data);

std::string base64_encode(ByteView data);
// Throws ParseError on malformed input.
Bytes base64_decode(std::string_view text);

inline ByteView as_bytes(std::string_view text) {
  return {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()};
}

}  // namespace curator
