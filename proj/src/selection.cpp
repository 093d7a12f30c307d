#include "reporeview/selection.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "reporeview/text.hpp"

namespace reporeview {

namespace fs = std::filesystem;

void SelectionConfig::validate() const {
  if (max_file_bytes == 0) throw std::invalid_argument("max_file_bytes must be positive");
  if (max_files == 0) throw std::invalid_argument("max_files must be positive");
}

FileEntry make_file_entry(std::string path, std::string_view bytes) {
  FileEntry e;
  e.path = std::move(path);
  e.byte_len = bytes.size();
  e.content = decode_utf8_lossy(bytes);
  e.line_count = count_lines(e.content);
  return e;
}

namespace {

std::string_view basename_of(std::string_view path) {
  const auto slash = path.rfind('/');
  return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

// Matches `[...]` at pattern[pi]; on success sets `end` past the closing bracket.
bool match_class(std::string_view pattern, std::size_t pi, char c, bool& ok, std::size_t& end) {
  std::size_t i = pi + 1;
  bool negate = false;
  if (i < pattern.size() && (pattern[i] == '!' || pattern[i] == '^')) {
    negate = true;
    ++i;
  }
  bool matched = false;
  bool first = true;
  while (i < pattern.size() && (pattern[i] != ']' || first)) {
    first = false;
    char lo = pattern[i];
    char hi = lo;
    if (i + 2 < pattern.size() && pattern[i + 1] == '-' && pattern[i + 2] != ']') {
      hi = pattern[i + 2];
      i += 3;
    } else {
      ++i;
    }
    if (c >= lo && c <= hi) matched = true;
  }
  if (i >= pattern.size()) return false;  // unterminated: treat '[' literally
  end = i + 1;
  ok = (matched != negate) && c != '/';
  return true;
}

bool glob_impl(std::string_view p, std::string_view s) {
  std::size_t pi = 0;
  std::size_t si = 0;
  while (pi < p.size()) {
    const char pc = p[pi];
    if (pc == '*') {
      const bool globstar = pi + 1 < p.size() && p[pi + 1] == '*';
      if (globstar) {
        std::size_t rest = pi + 2;
        // "**/" also matches zero directories.
        if (rest < p.size() && p[rest] == '/') {
          if (glob_impl(p.substr(rest + 1), s.substr(si))) return true;
        }
        for (std::size_t k = si; k <= s.size(); ++k) {
          if (glob_impl(p.substr(rest), s.substr(k))) return true;
        }
        return false;
      }
      for (std::size_t k = si; k <= s.size(); ++k) {
        if (glob_impl(p.substr(pi + 1), s.substr(k))) return true;
        if (k < s.size() && s[k] == '/') break;
      }
      return false;
    }
    if (si >= s.size()) return false;
    if (pc == '?') {
      if (s[si] == '/') return false;
    } else if (pc == '[') {
      bool ok = false;
      std::size_t end = 0;
      if (match_class(p, pi, s[si], ok, end)) {
        if (!ok) return false;
        pi = end;
        ++si;
        continue;
      }
      if (s[si] != '[') return false;
    } else if (pc != s[si]) {
      return false;
    }
    ++pi;
    ++si;
  }
  return si == s.size();
}

}  // namespace

bool glob_match(std::string_view pattern, std::string_view path) {
  if (pattern.find('/') == std::string_view::npos) return glob_impl(pattern, basename_of(path));
  if (pattern.starts_with('/')) pattern.remove_prefix(1);
  return glob_impl(pattern, path);
}

bool RuleSet::matches(std::string_view path) const {
  std::size_t start = 0;
  while (true) {
    const auto slash = path.find('/', start);
    if (slash == std::string_view::npos) break;
    const auto dir = path.substr(start, slash - start);
    if (std::find(directories.begin(), directories.end(), dir) != directories.end()) return true;
    start = slash + 1;
  }
  const auto base = basename_of(path);
  if (std::find(filenames.begin(), filenames.end(), base) != filenames.end()) return true;
  return std::any_of(suffixes.begin(), suffixes.end(), [&](const std::string& s) { return base.ends_with(s); });
}

RuleSet default_exclusion_rules() {
  RuleSet r;
  r.directories = {".git", "node_modules", "vendor", "dist", "build", "target", "__pycache__", ".venv"};
  r.filenames = {"package-lock.json", "yarn.lock", "Cargo.lock", "poetry.lock", "go.sum"};
  r.suffixes = {".min.js", ".min.css", ".map", ".lock"};
  return r;
}

std::optional<SkipReason> classify_path(std::string_view path, const SelectionConfig& config) {
  static const RuleSet rules = default_exclusion_rules();
  if (rules.matches(path)) return SkipReason::generated;
  for (const auto& g : config.extra_exclude_globs) {
    if (glob_match(g, path)) return SkipReason::excluded_by_config;
  }
  if (config.include_only) {
    const auto& inc = *config.include_only;
    if (std::none_of(inc.begin(), inc.end(), [&](const std::string& g) { return glob_match(g, path); })) {
      return SkipReason::excluded_by_config;
    }
  }
  return std::nullopt;
}

Classification classify_file(std::string_view path, std::string_view bytes, const SelectionConfig& config) {
  if (auto reason = classify_path(path, config)) return *reason;
  if (bytes.size() > config.max_file_bytes) return SkipReason::oversized;
  if (bytes.substr(0, kBinarySniffBytes).find('\0') != std::string_view::npos) return SkipReason::binary;
  return make_file_entry(std::string(path), bytes);
}

std::optional<std::string> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) return std::nullopt;
  return data;
}

Selection walk_tree(const fs::path& root, const std::optional<std::vector<std::string>>& candidates,
                    const SelectionConfig& config, const FileReader& reader) {
  config.validate();
  std::vector<std::string> paths;
  if (candidates) {
    std::set<std::string> unique;
    for (const auto& p : *candidates) {
      if (!is_clean_relative_path(p)) continue;
      std::error_code ec;
      if (fs::symlink_status(root / p, ec).type() == fs::file_type::regular) unique.insert(p);
    }
    paths.assign(unique.begin(), unique.end());
  } else {
    std::error_code ec;
    fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
    for (; !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
      const auto& entry = *it;
      const auto status = entry.symlink_status(ec);
      if (ec) break;
      if (it.depth() == 0 && entry.path().filename() == ".git") {
        it.disable_recursion_pending();
        continue;
      }
      if (status.type() != fs::file_type::regular) continue;
      paths.push_back(entry.path().lexically_relative(root).generic_string());
    }
    std::sort(paths.begin(), paths.end());
  }

  Selection out;
  for (const auto& rel : paths) {
    if (auto reason = classify_path(rel, config)) {
      out.skipped.push_back({rel, *reason});
      continue;
    }
    const fs::path full = root / rel;
    std::error_code ec;
    const auto size = fs::file_size(full, ec);
    if (ec) {
      out.skipped.push_back({rel, SkipReason::unreadable});
      continue;
    }
    if (size > config.max_file_bytes) {
      out.skipped.push_back({rel, SkipReason::oversized});
      continue;
    }
    auto bytes = reader(full);
    if (!bytes) {
      out.skipped.push_back({rel, SkipReason::unreadable});
      continue;
    }
    auto cls = classify_file(rel, *bytes, config);
    if (auto* reason = std::get_if<SkipReason>(&cls)) {
      out.skipped.push_back({rel, *reason});
    } else if (out.selected.size() >= config.max_files) {
      out.skipped.push_back({rel, SkipReason::over_file_limit});
    } else {
      out.selected.push_back(std::move(std::get<FileEntry>(cls)));
    }
  }
  return out;
}

Selection walk_repository(const Workspace& ws, const SelectionConfig& config) {
  return walk_tree(ws.root, ws.pr_changed_files, config);
}

}  // namespace reporeview
