#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "reporeview/model.hpp"
#include "reporeview/provider.hpp"
#include "reporeview/selection.hpp"

namespace reporeview {

/// Character budgets (counted in UTF-8 bytes) for the context-synthesis prompt.
struct ContextBudget {
  std::size_t total_chars = 24000;
  std::size_t tree_chars = 4000;
  std::size_t readme_chars = 8000;
  std::size_t preview_chars = 12000;
  std::size_t per_preview_chars = 2000;

  /// The three section budgets must add up to total_chars.
  void validate() const;
};

struct FilePreview {
  std::string path;
  std::string excerpt;

  bool operator==(const FilePreview&) const = default;
};

inline constexpr std::size_t kMaxPreviews = 10;

inline constexpr const char* kManifestNames[] = {"package.json", "pyproject.toml", "Cargo.toml", "go.mod",
                                                 "Makefile",     "Dockerfile",     "CMakeLists.txt"};
inline constexpr const char* kReadmeNames[] = {"README.md", "README", "README.rst", "README.txt"};

/// Prompt material for the context call; construction enforces the budget.
class ContextInputs {
 public:
  ContextInputs(std::string tree_text, std::string readme_text, std::vector<FilePreview> previews,
                ContextBudget budget, std::string structure_note = {});

  const std::string& tree_text() const noexcept { return tree_text_; }
  const std::string& readme_text() const noexcept { return readme_text_; }
  const std::vector<FilePreview>& previews() const noexcept { return previews_; }
  const ContextBudget& budget() const noexcept { return budget_; }
  /// Short "N files selected; ..." line used by the fallback summary.
  const std::string& structure_note() const noexcept { return structure_note_; }
  std::size_t total_chars() const noexcept;
  /// True when the tree or README excerpt carries the truncation marker.
  bool truncated() const noexcept;

 private:
  std::string tree_text_;
  std::string readme_text_;
  std::vector<FilePreview> previews_;
  ContextBudget budget_;
  std::string structure_note_;
};

/// "skipped <reason>: <count>" lines for every reason that occurs, in enum order.
std::string skip_tally_lines(const std::vector<SkippedFile>& skipped);

/// Indented tree of the selected paths, followed by the skip tally, capped at tree_chars.
std::string render_tree(const std::vector<std::string>& selected_paths, const std::vector<SkippedFile>& skipped,
                        const ContextBudget& budget);

/// README is looked up among root-level selected files first, then on disk under `root`.
/// Previews are root manifests in fixed order, then the largest remaining files by line
/// count; each preview's path label is charged against preview_chars.
ContextInputs collect_context_inputs(const std::filesystem::path& root, const std::vector<FileEntry>& selected,
                                     const std::vector<SkippedFile>& skipped, const ContextBudget& budget);

extern const char* const kContextSystemPrompt;

std::vector<Message> build_context_prompt(const ContextInputs& inputs);

struct ContextOutcome {
  ContextSummary summary;
  bool degraded = false;
  std::string failure;
};

/// One model call. On provider failure returns the fallback summary, which starts with
/// "Context unavailable; structure:". Replay misses propagate.
ContextOutcome synthesize_context(const ContextInputs& inputs, Gateway& gateway);

std::string fallback_context_text(const ContextInputs& inputs);

}  // namespace reporeview
