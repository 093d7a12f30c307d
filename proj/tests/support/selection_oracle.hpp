#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "reporeview/selection.hpp"
#include "support.hpp"

namespace reporeview::testing {

// Random working trees for the selection partition property. Each tree mixes plain text,
// binary, oversized, generated, config-excluded and unreadable files, plus symlinks and a
// top-level .git directory that must never become candidates.
struct RandomTree {
  std::map<std::string, std::string> files;
  std::set<std::string> unreadable;
  std::vector<std::string> symlinks;
  std::optional<std::vector<std::string>> candidates;
  SelectionConfig config;
};

inline RandomTree generate_tree(std::mt19937& rng) {
  static const std::vector<std::string> dirs = {"",      "src/",         "src/util/",   "lib/",   "node_modules/x/",
                                                "vendor/", "docs/dist/", "a/build/",    "tests/", "pkg/target/"};
  static const std::vector<std::string> names = {"main.c",       "README",     "app.min.js", "style.min.css", "x.map",
                                                 "go.sum",       "yarn.lock",  "notes.txt",  "data.bin",      "util.py",
                                                 "Cargo.lock",   "index.html", "mod.rs",     "img.png",       "Makefile"};
  RandomTree t;
  t.config.max_file_bytes = 64 + rng() % 512;
  t.config.max_files = 1 + rng() % 12;
  if (rng() % 3 == 0) t.config.extra_exclude_globs = {"*.txt"};
  if (rng() % 5 == 0) t.config.include_only = std::vector<std::string>{"src/**"};
  const std::size_t n = rng() % 30;
  for (std::size_t i = 0; i < n; ++i) {
    auto path = dirs[rng() % dirs.size()] + std::to_string(rng() % 4) + "_" + names[rng() % names.size()];
    std::string bytes;
    switch (rng() % 5) {
      case 0: bytes = std::string(t.config.max_file_bytes + 1 + rng() % 100, 'x'); break;
      case 1: {
        bytes = std::string(1 + rng() % 60, 'b');
        bytes[rng() % bytes.size()] = '\0';
        break;
      }
      case 2: bytes = ""; break;
      default: bytes = fmt::format("line {}\nline two\n", rng() % 1000);
    }
    t.files[path] = bytes;
    if (rng() % 12 == 0) t.unreadable.insert(path);
  }
  t.files[".git/config"] = "[core]\n";
  t.files[".git/objects/ab"] = std::string(3, '\0');
  if (rng() % 2 == 0 && !t.files.empty()) t.symlinks.push_back("link_" + std::to_string(rng() % 100));
  if (rng() % 4 == 0) {
    std::vector<std::string> c;
    for (const auto& [p, b] : t.files) {
      // A hosted PR file list never names git internals.
      if (!p.starts_with(".git/") && rng() % 2 == 0) c.push_back(p);
    }
    c.push_back("missing/file.c");
    t.candidates = c;
  }
  return t;
}

inline void materialize(const RandomTree& t, const fs::path& root) {
  fs::create_directories(root);
  for (const auto& [p, b] : t.files) write_file(root / p, b);
  for (const auto& l : t.symlinks) fs::create_symlink(t.files.begin()->first, root / l);
}

/// Independent classification of one path, applying the documented rule order.
inline std::optional<SkipReason> oracle_reason(const std::string& path, const std::string& bytes,
                                               const RandomTree& t) {
  static const std::set<std::string> gen_dirs = {".git", "node_modules", "vendor", "dist",
                                                 "build", "target", "__pycache__", ".venv"};
  static const std::set<std::string> gen_names = {"package-lock.json", "yarn.lock", "Cargo.lock", "poetry.lock",
                                                  "go.sum"};
  std::vector<std::string> segs;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= path.size(); ++i) {
    if (i == path.size() || path[i] == '/') {
      segs.push_back(path.substr(start, i - start));
      start = i + 1;
    }
  }
  const auto base = segs.back();
  bool generated = gen_names.count(base) > 0;
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) generated = generated || gen_dirs.count(segs[i]) > 0;
  for (const char* s : {".min.js", ".min.css", ".map", ".lock"}) generated = generated || base.ends_with(s);
  if (generated) return SkipReason::generated;
  if (!t.config.extra_exclude_globs.empty() && base.ends_with(".txt")) return SkipReason::excluded_by_config;
  if (t.config.include_only && !path.starts_with("src/")) return SkipReason::excluded_by_config;
  if (bytes.size() > t.config.max_file_bytes) return SkipReason::oversized;
  if (t.unreadable.count(path)) return SkipReason::unreadable;
  if (bytes.substr(0, kBinarySniffBytes).find('\0') != std::string::npos) return SkipReason::binary;
  return std::nullopt;
}

/// Walks a materialized tree and compares against the oracle. Empty on success.
inline std::string check_selection_case(const RandomTree& t, const fs::path& root) {
  const FileReader reader = [&](const fs::path& full) -> std::optional<std::string> {
    if (t.unreadable.count(full.lexically_relative(root).generic_string())) return std::nullopt;
    return read_file_bytes(full);
  };
  const auto sel = walk_tree(root, t.candidates, t.config, reader);

  // Candidates: regular files outside the top-level .git, filtered by the candidate list.
  std::vector<std::string> candidates;
  for (const auto& [p, b] : t.files) {
    if (p.starts_with(".git/")) continue;
    if (t.candidates && std::find(t.candidates->begin(), t.candidates->end(), p) == t.candidates->end()) continue;
    candidates.push_back(p);
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<std::string> seen;
  for (const auto& f : sel.selected) seen.push_back(f.path);
  for (const auto& s : sel.skipped) seen.push_back(s.path);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) return "a path appears twice";
  if (seen != candidates) {
    std::vector<std::string> diff;
    std::set_symmetric_difference(seen.begin(), seen.end(), candidates.begin(), candidates.end(), std::back_inserter(diff));
    return fmt::format("partition mismatch: {} seen, {} candidates, differing: {}", seen.size(), candidates.size(),
                       fmt::join(diff, ", "));
  }

  // Expected outcome per path, with the file cap applied in byte-wise order.
  std::vector<std::string> expected_selected;
  std::map<std::string, SkipReason> expected_skipped;
  for (const auto& p : candidates) {
    if (auto r = oracle_reason(p, t.files.at(p), t)) {
      expected_skipped[p] = *r;
    } else if (expected_selected.size() < t.config.max_files) {
      expected_selected.push_back(p);
    } else {
      expected_skipped[p] = SkipReason::over_file_limit;
    }
  }
  std::vector<std::string> got_selected;
  for (const auto& f : sel.selected) {
    got_selected.push_back(f.path);
    if (f.byte_len > t.config.max_file_bytes) return "selected file over the size cap";
    if (f.content.substr(0, kBinarySniffBytes).find('\0') != std::string::npos) return "selected file has a NUL";
    if (f.content != t.files.at(f.path)) return "selected content differs from the file";
  }
  if (got_selected != expected_selected) return "selected list differs from the oracle";
  for (const auto& s : sel.skipped) {
    if (expected_skipped.at(s.path) != s.reason) {
      return fmt::format("{} skipped as {}, expected {}", s.path, to_string(s.reason),
                         to_string(expected_skipped.at(s.path)));
    }
  }
  return {};
}

}  // namespace reporeview::testing
