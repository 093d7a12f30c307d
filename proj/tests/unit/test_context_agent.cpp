#include <doctest.h>

#include <fmt/format.h>

#include "reporeview/context_agent.hpp"
#include "reporeview/text.hpp"
#include "support.hpp"

using namespace reporeview;
using namespace reporeview::testing;

namespace {

Gateway gateway_for(std::shared_ptr<Provider> p) {
  return Gateway(std::move(p), "m", RetryPolicy{}, std::make_shared<VirtualSleeper>());
}

std::vector<FileEntry> entries(const TempDir& root, const std::map<std::string, std::string>& files) {
  std::vector<FileEntry> out;
  for (const auto& [p, b] : files) {
    write_file(root / p, b);
    out.push_back(make_file_entry(p, b));
  }
  return out;
}

}  // namespace

TEST_CASE("budget validation") {
  CHECK_NOTHROW(ContextBudget{}.validate());
  CHECK_THROWS_AS((ContextBudget{100, 10, 10, 10, 5}.validate()), std::invalid_argument);
}

TEST_CASE("render_tree layout") {
  const auto tree = render_tree({"a/b.c", "a/d.c", "e.txt"}, {{"x.png", SkipReason::binary}}, ContextBudget{});
  CHECK(tree.starts_with("a/\n  b.c\n  d.c\ne.txt\n"));
  CHECK(tree.find("skipped binary: 1") != std::string::npos);

  const auto empty = render_tree({}, {{"x.png", SkipReason::binary}, {"y.min.js", SkipReason::generated}}, {});
  CHECK(empty == skip_tally_lines({{"x.png", SkipReason::binary}, {"y.min.js", SkipReason::generated}}));

  std::vector<std::string> many;
  for (int i = 0; i < 1000; ++i) many.push_back(fmt::format("dir{}/file{}.c", i % 7, i));
  const auto cut = render_tree(many, {}, ContextBudget{});
  CHECK(cut.size() <= 4000);
  CHECK(cut.ends_with(kTruncationMarker));
}

TEST_CASE("skip tally lines follow reason order") {
  CHECK(skip_tally_lines({{"a", SkipReason::oversized}, {"b", SkipReason::binary}, {"c", SkipReason::binary}}) ==
        "skipped binary: 2\nskipped oversized: 1\n");
  CHECK(skip_tally_lines({}).empty());
}

TEST_CASE("hello-world style repo has a README and no previews") {
  TempDir root;
  const auto sel = entries(root, {{"README", "Hello World!\n"}});
  const auto in = collect_context_inputs(root.path(), sel, {}, {});
  CHECK(in.readme_text() == "Hello World!\n");
  CHECK(in.previews().empty());
  CHECK_FALSE(in.truncated());
}

TEST_CASE("README lookup is case-insensitive and truncated to budget") {
  TempDir root;
  const auto sel = entries(root, {{"readme.MD", std::string(30000, 'r')}, {"main.c", "int main;\n"}});
  const auto in = collect_context_inputs(root.path(), sel, {}, {});
  CHECK(in.readme_text().size() <= 8000);
  CHECK(in.readme_text().ends_with(kTruncationMarker));
  CHECK(in.truncated());
  for (const auto& p : in.previews()) CHECK(p.path != "readme.MD");
}

TEST_CASE("manifests come first among previews") {
  TempDir root;
  const auto sel = entries(root, {{"Cargo.toml", "[package]\n"},
                                  {"src/a.rs", "a\nb\nc\n"},
                                  {"src/b.rs", "a\n"},
                                  {"src/c.rs", "a\nb\n"},
                                  {"sub/Makefile", "all:\n"}});
  const auto in = collect_context_inputs(root.path(), sel, {}, {});
  REQUIRE(in.previews().size() >= 2);
  CHECK(in.previews()[0].path == "Cargo.toml");
  CHECK(in.previews()[1].path == "src/a.rs");
}

TEST_CASE("inputs always fit the budget") {
  TempDir root;
  std::map<std::string, std::string> files{{"README.md", std::string(20000, 'r')}};
  for (int i = 0; i < 30; ++i) files[fmt::format("src/f{}.c", i)] = std::string(5000 + i, 'c');
  const auto sel = entries(root, files);
  for (const auto& budget : {ContextBudget{}, ContextBudget{3000, 500, 1000, 1500, 400}}) {
    const auto in = collect_context_inputs(root.path(), sel, {}, budget);
    CHECK(in.total_chars() <= budget.total_chars);
    std::size_t prompt = 0;
    for (const auto& m : build_context_prompt(in)) prompt += m.content.size();
    CHECK(prompt <= budget.total_chars + 1000 + std::string(kContextSystemPrompt).size());
    for (const auto& p : in.previews()) CHECK(p.excerpt.size() <= budget.per_preview_chars);
  }
  // Deterministic.
  const auto a = collect_context_inputs(root.path(), sel, {}, {});
  const auto b = collect_context_inputs(root.path(), sel, {}, {});
  CHECK(a.previews() == b.previews());
  CHECK(a.tree_text() == b.tree_text());
}

TEST_CASE("over-budget inputs are rejected") {
  CHECK_THROWS_AS(ContextInputs(std::string(5000, 't'), "", {}, ContextBudget{}), std::invalid_argument);
}

TEST_CASE("synthesize passes text through and degrades on failure") {
  const ContextInputs in("a/\n  b.c\n", "Demo readme\nmore", {}, ContextBudget{}, "1 files selected");
  auto stub = std::make_shared<StubProvider>();
  stub->add(build_context_prompt(in), "A demo repo.");
  auto gw = gateway_for(stub);
  const auto ok = synthesize_context(in, gw);
  CHECK(ok.summary.text == "A demo repo.");
  CHECK_FALSE(ok.degraded);
  CHECK(ok.summary.readme_excerpt == in.readme_text());

  auto dead = gateway_for(std::make_shared<FailingProvider>());
  const auto fb = synthesize_context(in, dead);
  CHECK(fb.degraded);
  CHECK(fb.summary.text.starts_with("Context unavailable; structure:"));
  CHECK(fb.summary.text.find("Demo readme") != std::string::npos);
  CHECK(fb.summary.truncated == in.truncated());

  auto miss = gateway_for(std::make_shared<FailingProvider>(ProviderErrorKind::replay_miss));
  CHECK_THROWS_AS(synthesize_context(in, miss), ProviderError);
}
