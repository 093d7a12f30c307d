#include <doctest.h>

#include <random>

#include <fmt/format.h>

#include "parser_fuzz.hpp"
#include "reporeview/review_agent.hpp"
#include "support.hpp"

using namespace reporeview;
using namespace reporeview::testing;

namespace {

FileEntry ten_lines() {
  std::string content;
  for (int i = 1; i <= 10; ++i) content += fmt::format("line {}\n", i);
  return make_file_entry("src/a.c", content);
}

Gateway gateway_for(std::shared_ptr<Provider> p) {
  return Gateway(std::move(p), "m", RetryPolicy{}, std::make_shared<VirtualSleeper>());
}

}  // namespace

TEST_CASE("review prompt layout") {
  const auto f = make_file_entry("x.py", "a\nb\nc\n");
  const auto plain = build_review_prompt(f, nullptr);
  REQUIRE(plain.size() == 2);
  CHECK(plain[0].role == Role::system);
  CHECK(plain[0].content == kReviewSystemPrompt);
  CHECK(std::string(kReviewSystemPrompt).find("file, line, severity, issue, suggestion") != std::string::npos);
  CHECK(std::string(kReviewSystemPrompt).find("critical|high|medium|low|info") != std::string::npos);
  CHECK(plain[1].content.find("PROJECT CONTEXT") == std::string::npos);
  CHECK(plain[1].content.find("FILE: x.py") != std::string::npos);
  CHECK(plain[1].content.find("1: a\n2: b\n3: c") != std::string::npos);

  const ContextSummary ctx{"A demo.", "", "", {}, false};
  const auto with_ctx = build_review_prompt(f, &ctx);
  CHECK(with_ctx[1].content.find("PROJECT CONTEXT:\nA demo.") != std::string::npos);
}

TEST_CASE("long files are truncated in the prompt") {
  const auto f = make_file_entry("big.c", std::string(60000, 'a') + "\n");
  const auto p = build_review_prompt(f, nullptr);
  CHECK(p[1].content.find(std::string(kTruncationMarker)) != std::string::npos);
  CHECK(p[1].content.size() < 50000);
}

TEST_CASE("parse_findings examples") {
  const auto f = ten_lines();
  {
    const auto r = parse_findings("```json\n[{\"line\":\"3\",\"severity\":\"Major\",\"issue\":\"x\"}]\n```", f);
    REQUIRE(r.comments.size() == 1);
    CHECK(r.comments[0].line == 3);
    CHECK(r.comments[0].severity == Severity::high);
    CHECK(r.comments[0].issue == "x");
    CHECK(r.comments[0].file == "src/a.c");
    CHECK(r.comments[0].suggestion.empty());
  }
  {
    const auto r = parse_findings(R"([{"severity":"high","suggestion":"fix"}])", f);
    CHECK(r.comments.empty());
    CHECK(r.dropped == 1);
    CHECK_FALSE(r.parse_failure);
  }
  {
    const auto r = parse_findings(R"(Sure! Here are issues: [{"issue":"y","line":999}])", f);
    REQUIRE(r.comments.size() == 1);
    CHECK(r.comments[0].line == 10);
    CHECK(r.comments[0].severity == Severity::medium);
  }
  {
    const auto r = parse_findings("I could not find anything worth reporting.", f);
    CHECK(r.comments.empty());
    CHECK(r.parse_failure);
  }
  {
    // A single object is wrapped; a foreign path is overridden and counted.
    const auto r = parse_findings(R"({"file":"other.c","line":2,"severity":"warning","issue":"z"})", f);
    REQUIRE(r.comments.size() == 1);
    CHECK(r.comments[0].file == "src/a.c");
    CHECK(r.comments[0].severity == Severity::medium);
    CHECK(r.coerced >= 1);
  }
  {
    // Brackets inside strings do not confuse the scan.
    const auto r = parse_findings(R"(note [see below] [{"issue":"has ] and [ inside","line":"x"}])", f);
    REQUIRE(r.comments.size() == 1);
    CHECK(r.comments[0].issue == "has ] and [ inside");
    CHECK(r.comments[0].line == 1);
  }
  {
    const auto r = parse_findings(R"([{"issue":"unknown sev","line":4,"severity":"spicy"}])", f);
    REQUIRE(r.comments.size() == 1);
    CHECK(r.comments[0].severity == Severity::medium);
    CHECK(r.coerced == 1);
  }
}

TEST_CASE("severity synonyms") {
  const std::vector<std::pair<std::vector<const char*>, Severity>> table = {
      {{"blocker", "critical"}, Severity::critical},
      {{"major", "error", "severe", "high"}, Severity::high},
      {{"warning", "moderate", "medium"}, Severity::medium},
      {{"minor", "low", "nit", "nitpick"}, Severity::low},
      {{"info", "note", "style", "informational"}, Severity::info}};
  for (const auto& [words, sev] : table) {
    for (const auto* w : words) {
      CAPTURE(w);
      CHECK(coerce_severity(w) == sev);
      std::string upper = w;
      for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      CHECK(coerce_severity(upper) == sev);
    }
  }
  CHECK_FALSE(coerce_severity("spicy").has_value());
}

TEST_CASE("extract_json_payload") {
  CHECK(extract_json_payload("x [1] [{\"a\":1}]") == nlohmann::json::parse(R"([{"a":1}])"));
  CHECK(extract_json_payload("prefix {\"a\": \"}\"} suffix") == nlohmann::json::parse(R"({"a":"}"})"));
  CHECK_FALSE(extract_json_payload("nothing").has_value());
  CHECK_FALSE(extract_json_payload("[unclosed").has_value());
}

TEST_CASE("snippet windows") {
  const auto f = ten_lines();
  ReviewComment c;
  c.line = 5;
  CHECK(attach_snippet(c, f).snippet == "3: line 3\n4: line 4\n5: line 5\n6: line 6\n7: line 7");
  const auto three = make_file_entry("t", "a\nb\nc\n");
  c.line = 1;
  CHECK(attach_snippet(c, three).snippet == "1: a\n2: b\n3: c");
  const auto one = make_file_entry("o", "only\n");
  CHECK(attach_snippet(c, one).snippet == "1: only");
  for (std::uint32_t line = 1; line <= 10; ++line) {
    for (std::size_t radius = 0; radius < 5; ++radius) {
      c.line = line;
      const auto s = attach_snippet(c, f, radius).snippet;
      const auto expected = std::min<std::size_t>(10, line + radius) - std::max<std::int64_t>(1, std::int64_t(line) - std::int64_t(radius)) + 1;
      CHECK(count_lines(s) == expected);
    }
  }
}

TEST_CASE("parser totality and invariants under fuzz") {
  std::mt19937 rng(123);
  const auto f = ten_lines();
  const auto empty = make_file_entry("e.txt", "");
  for (int i = 0; i < 20000; ++i) {
    const auto text = fuzz_string(rng);
    const auto& file = i % 7 == 0 ? empty : f;
    ParsedFindings r;
    REQUIRE_NOTHROW(r = parse_findings(text, file));
    const auto why = check_parsed(r, file);
    CHECK_MESSAGE(why.empty(), why);
    if (i % 100 == 0) CHECK(parse_findings(text, file).comments == r.comments);
  }
  for (const auto& seed : kParserSeeds) CHECK(check_parsed(parse_findings(seed, f), f).empty());
}

TEST_CASE("review_file composes prompt, parse and snippets") {
  const auto f = ten_lines();
  auto stub = std::make_shared<StubProvider>();
  stub->add(build_review_prompt(f, nullptr),
            R"([{"line":2,"severity":"low","issue":"a"},{"line":9,"severity":"critical","issue":"b"}])");
  auto gw = gateway_for(stub);
  const auto r = review_file(f, nullptr, gw);
  REQUIRE(r.comments.size() == 2);
  CHECK(r.comments[0].snippet.starts_with("1: line 1"));
  CHECK(r.comments[1].id == comment_id("src/a.c", 9, "b"));
  CHECK_FALSE(r.failed);

  auto prose = std::make_shared<StubProvider>("nothing to see");
  auto gw2 = gateway_for(prose);
  const auto p = review_file(f, nullptr, gw2);
  CHECK(p.comments.empty());
  CHECK(p.parse_failure);

  auto gw3 = gateway_for(std::make_shared<FailingProvider>());
  const auto dead = review_file(f, nullptr, gw3);
  CHECK(dead.comments.empty());
  CHECK(dead.failed);

  auto gw4 = gateway_for(std::make_shared<FailingProvider>(ProviderErrorKind::replay_miss));
  CHECK_THROWS_AS(review_file(f, nullptr, gw4), ProviderError);
}

TEST_CASE("combined prompt budget and parsing") {
  const std::vector<FileEntry> files = {make_file_entry("a.c", "x\n"), make_file_entry("b.c", std::string(500, 'y')),
                                        make_file_entry("c.c", "z\n")};
  const auto all = build_combined_prompt("tree", files, 100000);
  CHECK(all.included.size() == 3);
  CHECK(all.left_out.empty());
  CHECK(all.messages[0].content == kCombinedSystemPrompt);
  const auto tight = build_combined_prompt("tree", files, 300);
  CHECK(tight.included.size() + tight.left_out.size() == 3);
  CHECK_FALSE(tight.left_out.empty());
  // Greedy in selection order: later small files can still fit.
  CHECK(tight.included.front()->path == "a.c");

  const auto parsed = parse_combined(
      R"({"findings":[{"file":"c.c","line":1,"severity":"high","issue":"q"},{"file":"zzz.c","issue":"lost"}],"summary":"S"})",
      all.included);
  REQUIRE(parsed.findings.comments.size() == 1);
  CHECK(parsed.findings.comments[0].file == "c.c");
  CHECK(parsed.findings.comments[0].snippet == "1: z");
  CHECK(parsed.findings.dropped == 1);
  CHECK(parsed.summary == "S");

  const std::vector<const FileEntry*> only{&files[0]};
  const auto single = parse_combined(R"([{"line":1,"issue":"w"}])", only);
  REQUIRE(single.findings.comments.size() == 1);
  CHECK(single.findings.comments[0].file == "a.c");
  CHECK_FALSE(single.summary.has_value());
}
