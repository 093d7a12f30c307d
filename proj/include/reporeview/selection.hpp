#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "reporeview/model.hpp"
#include "reporeview/repo.hpp"

namespace reporeview {

struct SelectionConfig {
  std::uint64_t max_file_bytes = 200 * 1024;
  std::size_t max_files = 50;
  std::vector<std::string> extra_exclude_globs;
  std::optional<std::vector<std::string>> include_only;

  /// Throws std::invalid_argument when a cap is zero.
  void validate() const;
};

struct FileEntry {
  std::string path;
  std::uint64_t byte_len = 0;
  std::size_t line_count = 0;
  std::string content;

  bool operator==(const FileEntry&) const = default;
};

/// Makes a FileEntry from raw bytes, decoding lossily as UTF-8.
FileEntry make_file_entry(std::string path, std::string_view bytes);

/// Built-in patterns for generated and vendored content.
class RuleSet {
 public:
  std::vector<std::string> directories;
  std::vector<std::string> filenames;
  std::vector<std::string> suffixes;

  bool matches(std::string_view path) const;
};

RuleSet default_exclusion_rules();

/// Shell-style glob over '/'-separated paths: `*` and `?` stay within a segment, `**`
/// spans segments and `[...]` is a character class (`[!...]` negates). Patterns without
/// a '/' are matched against the last path segment only.
bool glob_match(std::string_view pattern, std::string_view path);

inline constexpr std::size_t kBinarySniffBytes = 8192;

/// Path-only rules in evaluation order: generated, then configured excludes/includes.
std::optional<SkipReason> classify_path(std::string_view path, const SelectionConfig& config);

using Classification = std::variant<FileEntry, SkipReason>;

/// Applies, in order: generated pattern, configured excludes/includes, size cap, and a
/// NUL byte within the first 8 KiB.
Classification classify_file(std::string_view path, std::string_view bytes, const SelectionConfig& config);

struct Selection {
  std::vector<FileEntry> selected;
  std::vector<SkippedFile> skipped;
};

/// Reads a file, or returns nullopt when it cannot be read.
using FileReader = std::function<std::optional<std::string>(const std::filesystem::path&)>;

std::optional<std::string> read_file_bytes(const std::filesystem::path& path);

/// Visits regular files under `root` in byte-wise path order (symlinks are not followed,
/// the top-level `.git` directory is not descended). When `candidates` is given only
/// those paths are considered. Selections beyond `max_files` become over_file_limit.
Selection walk_tree(const std::filesystem::path& root, const std::optional<std::vector<std::string>>& candidates,
                    const SelectionConfig& config, const FileReader& reader = read_file_bytes);

Selection walk_repository(const Workspace& ws, const SelectionConfig& config);

}  // namespace reporeview
