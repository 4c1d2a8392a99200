#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace concord::detail {

std::string_view trim(std::string_view text);

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Bytes >= 0x80 count as word characters so multi-byte letters never form a
// boundary.
inline bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') ||
         (u >= 'A' && u <= 'Z') || u == '_';
}

std::string ascii_lower(std::string_view text);

// Uniform integer in [0, bound) from raw engine output. Unlike
// std::uniform_int_distribution the result is identical on every standard
// library, which keeps seeded splits portable.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

// Fisher-Yates over `items` driven by uniform_below.
template <typename T>
void portable_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

std::string format_iso8601(std::chrono::sys_seconds instant);
std::chrono::sys_seconds parse_iso8601(std::string_view text);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace concord::detail
