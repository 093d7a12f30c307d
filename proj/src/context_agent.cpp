#include "reporeview/context_agent.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <memory>

#include <fmt/format.h>

#include "reporeview/text.hpp"

namespace reporeview {

namespace fs = std::filesystem;

const char* const kContextSystemPrompt =
    "You are a senior software engineer preparing to review a repository. Using the repository "
    "tree, README and key file previews provided, write a plain-text summary of the project's "
    "purpose, its architecture and its notable conventions (languages, build system, layout). "
    "Keep it under 200 words. Do not list individual defects and do not use Markdown.";

void ContextBudget::validate() const {
  if (tree_chars + readme_chars + preview_chars != total_chars) {
    throw std::invalid_argument(fmt::format("context budget sections ({} + {} + {}) must add up to total_chars {}",
                                            tree_chars, readme_chars, preview_chars, total_chars));
  }
  if (per_preview_chars == 0) throw std::invalid_argument("per_preview_chars must be positive");
}

ContextInputs::ContextInputs(std::string tree_text, std::string readme_text, std::vector<FilePreview> previews,
                             ContextBudget budget, std::string structure_note)
    : tree_text_(std::move(tree_text)),
      readme_text_(std::move(readme_text)),
      previews_(std::move(previews)),
      budget_(budget),
      structure_note_(std::move(structure_note)) {
  budget_.validate();
  if (tree_text_.size() > budget_.tree_chars) {
    throw std::invalid_argument(fmt::format("tree text ({}) exceeds tree_chars {}", tree_text_.size(), budget_.tree_chars));
  }
  if (readme_text_.size() > budget_.readme_chars) {
    throw std::invalid_argument(
        fmt::format("README text ({}) exceeds readme_chars {}", readme_text_.size(), budget_.readme_chars));
  }
  std::size_t preview_total = 0;
  for (const auto& p : previews_) {
    if (p.excerpt.size() > budget_.per_preview_chars) {
      throw std::invalid_argument(fmt::format("preview of {} exceeds per_preview_chars", p.path));
    }
    preview_total += p.excerpt.size();
  }
  if (preview_total > budget_.preview_chars) {
    throw std::invalid_argument(fmt::format("previews ({}) exceed preview_chars {}", preview_total, budget_.preview_chars));
  }
  if (total_chars() > budget_.total_chars) {
    throw std::invalid_argument(fmt::format("context inputs ({}) exceed total_chars {}", total_chars(), budget_.total_chars));
  }
}

std::size_t ContextInputs::total_chars() const noexcept {
  std::size_t n = tree_text_.size() + readme_text_.size();
  for (const auto& p : previews_) n += p.excerpt.size();
  return n;
}

bool ContextInputs::truncated() const noexcept {
  return tree_text_.ends_with(kTruncationMarker) || readme_text_.ends_with(kTruncationMarker);
}

std::string skip_tally_lines(const std::vector<SkippedFile>& skipped) {
  std::string out;
  for (auto reason : kAllSkipReasons) {
    const auto n = std::count_if(skipped.begin(), skipped.end(), [&](const SkippedFile& s) { return s.reason == reason; });
    if (n > 0) out += fmt::format("skipped {}: {}\n", to_string(reason), n);
  }
  return out;
}

namespace {

struct TreeNode {
  std::map<std::string, std::unique_ptr<TreeNode>> children;
  bool is_file = false;
};

void render_node(const TreeNode& node, int depth, std::string& out) {
  for (const auto& [name, child] : node.children) {
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
    out.append(name);
    if (!child->is_file) out.push_back('/');
    out.push_back('\n');
    if (!child->is_file) render_node(*child, depth + 1, out);
  }
}

std::string preview_label(std::string_view path) { return fmt::format("--- {} ---\n", path); }

std::string lower_name(std::string_view path) { return to_lower_ascii(path); }

std::string first_nonblank_line(std::string_view text) {
  for (auto line : split_lines(text)) {
    auto t = trim(line);
    if (!t.empty()) return t;
  }
  return {};
}

}  // namespace

std::string render_tree(const std::vector<std::string>& selected_paths, const std::vector<SkippedFile>& skipped,
                        const ContextBudget& budget) {
  TreeNode root;
  for (const auto& path : selected_paths) {
    TreeNode* node = &root;
    std::size_t start = 0;
    while (true) {
      const auto slash = path.find('/', start);
      const std::string part = path.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
      auto& child = node->children[part];
      if (!child) child = std::make_unique<TreeNode>();
      if (slash == std::string::npos) {
        child->is_file = true;
        break;
      }
      node = child.get();
      start = slash + 1;
    }
  }
  std::string out;
  render_node(root, 0, out);
  out += skip_tally_lines(skipped);
  return truncate_with_marker(out, budget.tree_chars).text;
}

ContextInputs collect_context_inputs(const fs::path& root, const std::vector<FileEntry>& selected,
                                     const std::vector<SkippedFile>& skipped, const ContextBudget& budget) {
  budget.validate();
  std::vector<std::string> paths;
  paths.reserve(selected.size());
  for (const auto& f : selected) paths.push_back(f.path);
  std::string tree = render_tree(paths, skipped, budget);

  // README: root-level selected file first, then the file on disk.
  std::string readme;
  std::string readme_path;
  for (const char* candidate : kReadmeNames) {
    const std::string want = lower_name(candidate);
    auto it = std::find_if(selected.begin(), selected.end(), [&](const FileEntry& f) {
      return f.path.find('/') == std::string::npos && lower_name(f.path) == want;
    });
    if (it != selected.end()) {
      readme = truncate_with_marker(it->content, budget.readme_chars).text;
      readme_path = it->path;
      break;
    }
    std::error_code ec;
    for (fs::directory_iterator d(root, ec), end; !ec && d != end; d.increment(ec)) {
      if (!d->is_regular_file(ec) || lower_name(d->path().filename().string()) != want) continue;
      std::ifstream in(d->path(), std::ios::binary);
      std::string head(budget.readme_chars + 4, '\0');
      in.read(head.data(), static_cast<std::streamsize>(head.size()));
      head.resize(static_cast<std::size_t>(in.gcount()));
      readme = truncate_with_marker(decode_utf8_lossy(head), budget.readme_chars).text;
      readme_path = d->path().filename().string();
      break;
    }
    if (!readme_path.empty()) break;
  }

  std::vector<const FileEntry*> order;
  for (const char* manifest : kManifestNames) {
    auto it = std::find_if(selected.begin(), selected.end(), [&](const FileEntry& f) { return f.path == manifest; });
    if (it != selected.end()) order.push_back(&*it);
  }
  std::vector<const FileEntry*> sources;
  for (const auto& f : selected) {
    if (f.path == readme_path || std::find(order.begin(), order.end(), &f) != order.end()) continue;
    sources.push_back(&f);
  }
  std::stable_sort(sources.begin(), sources.end(), [](const FileEntry* a, const FileEntry* b) {
    if (a->line_count != b->line_count) return a->line_count > b->line_count;
    return a->path < b->path;
  });
  order.insert(order.end(), sources.begin(), sources.end());

  std::vector<FilePreview> previews;
  std::size_t remaining = budget.preview_chars;
  for (const FileEntry* f : order) {
    if (previews.size() >= kMaxPreviews) break;
    if (f->content.empty()) continue;
    const auto label = preview_label(f->path).size();
    if (remaining <= label + kTruncationMarker.size()) break;
    const auto limit = std::min(budget.per_preview_chars, remaining - label);
    auto excerpt = truncate_with_marker(f->content, limit).text;
    remaining -= label + excerpt.size();
    previews.push_back({f->path, std::move(excerpt)});
  }

  std::string note = fmt::format("{} files selected", selected.size());
  if (skipped.empty()) {
    note += ", none skipped";
  } else {
    std::string reasons;
    for (auto reason : kAllSkipReasons) {
      const auto n = std::count_if(skipped.begin(), skipped.end(), [&](const SkippedFile& s) { return s.reason == reason; });
      if (n == 0) continue;
      if (!reasons.empty()) reasons += ", ";
      reasons += fmt::format("{}: {}", to_string(reason), n);
    }
    note += fmt::format(", {} skipped ({})", skipped.size(), reasons);
  }
  return ContextInputs(std::move(tree), std::move(readme), std::move(previews), budget, std::move(note));
}

std::vector<Message> build_context_prompt(const ContextInputs& inputs) {
  std::string user = "REPOSITORY TREE:\n";
  user += inputs.tree_text().empty() ? "(empty)\n" : inputs.tree_text();
  if (!user.ends_with('\n')) user += '\n';
  user += "\nREADME:\n";
  user += inputs.readme_text().empty() ? "(none)" : inputs.readme_text();
  user += "\n\nKEY FILE PREVIEWS:\n";
  if (inputs.previews().empty()) user += "(none)\n";
  for (const auto& p : inputs.previews()) {
    user += preview_label(p.path);
    user += p.excerpt;
    if (!user.ends_with('\n')) user += '\n';
  }
  return {{Role::system, kContextSystemPrompt}, {Role::user, std::move(user)}};
}

std::string fallback_context_text(const ContextInputs& inputs) {
  const auto readme_line = first_nonblank_line(inputs.readme_text());
  return fmt::format("Context unavailable; structure: {}. README: {}", inputs.structure_note(),
                     readme_line.empty() ? "(none)" : readme_line);
}

ContextOutcome synthesize_context(const ContextInputs& inputs, Gateway& gateway) {
  ContextOutcome out;
  out.summary.tree_excerpt = inputs.tree_text();
  out.summary.readme_excerpt = inputs.readme_text();
  for (const auto& p : inputs.previews()) out.summary.preview_paths.push_back(p.path);
  out.summary.truncated = inputs.truncated();
  try {
    auto response = gateway.complete(build_context_prompt(inputs));
    auto text = trim(response.text);
    if (!text.empty()) {
      out.summary.text = std::move(text);
      return out;
    }
    out.failure = "model returned an empty context summary";
  } catch (const ProviderError& e) {
    if (e.kind() == ProviderErrorKind::replay_miss) throw;
    out.failure = e.what();
  }
  out.degraded = true;
  out.summary.text = fallback_context_text(inputs);
  return out;
}

}  // namespace reporeview
