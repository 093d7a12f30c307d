#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace reporeview {

inline constexpr std::string_view kTruncationMarker = "…[truncated]";

/// Decodes bytes as UTF-8, replacing every invalid sequence with U+FFFD.
std::string decode_utf8_lossy(std::string_view bytes);

/// Number of lines; a final '\n' ends the last line rather than starting a new one.
std::size_t count_lines(std::string_view content);

/// Splits on '\n'; yields count_lines(content) entries.
std::vector<std::string_view> split_lines(std::string_view content);

/// Largest prefix no longer than `max_bytes` that ends on a UTF-8 boundary.
std::string_view utf8_prefix(std::string_view text, std::size_t max_bytes);

struct Truncated {
  std::string text;
  bool truncated = false;
};

/// Returns `text` unchanged when it fits in `limit` bytes; otherwise a prefix followed by
/// the truncation marker, the whole no longer than `limit`.
Truncated truncate_with_marker(std::string_view text, std::size_t limit);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Each line prefixed "N: ", joined with '\n'.
std::string number_lines(std::string_view content, std::size_t first_line = 1);

}  // namespace reporeview
