#include <doctest.h>

#include <cstdlib>

#include "reporeview/orchestrator.hpp"
#include "reporeview/transcript.hpp"
#include "support.hpp"

using namespace reporeview;
using namespace reporeview::testing;

// The checked-in transcripts are recordings of the scripted provider. Any change to a
// prompt template changes request hashes and shows up here as a diff. Regenerate with
// REPOREVIEW_UPDATE_FIXTURES=1.

namespace {

std::string record_transcript(const std::string& owner, const std::string& name, const std::string& fixture_dir) {
  RemoteFarm farm;
  farm.add_fixture(owner, name, fixture_dir);
  TempDir work{"rr-fixture"};
  const auto transcript = work / "t.jsonl";
  {
    auto recorder = std::make_shared<RecordingProvider>(std::make_shared<ScriptedProvider>(), transcript);
    for (auto mode : kAllModes) {
      auto deps = offline_deps(farm, recorder, work.path());
      deps.output_dir = work / std::string(to_string(mode));
      const auto r = run_review(parse_repo_url("https://github.com/" + owner + "/" + name), mode, deps);
      REQUIRE_MESSAGE(r.ok, r.error);
    }
  }
  return read_file(transcript);
}

void check_fixture(const std::string& file, const std::string& recorded) {
  const auto path = fixture_path(file);
  const char* update = std::getenv("REPOREVIEW_UPDATE_FIXTURES");
  if (update != nullptr && std::string(update) == "1") {
    write_file(path, recorded);
    MESSAGE("rewrote " << path.string());
  }
  REQUIRE(fs::exists(path));
  CHECK_MESSAGE(read_file(path) == recorded, file << " is stale; rerun with REPOREVIEW_UPDATE_FIXTURES=1");
}

}  // namespace

TEST_CASE("hello-world transcript matches current prompts") {
  check_fixture("hw.jsonl", record_transcript("octocat", "Hello-World", "repos/hello-world"));
}

TEST_CASE("sample transcript matches current prompts") {
  check_fixture("sample.jsonl", record_transcript("acme", "greet", "repos/sample"));
}

TEST_CASE("transcripts replay every mode without a miss") {
  for (const auto& [owner, name, dir, file] :
       {std::tuple{"octocat", "Hello-World", "repos/hello-world", "hw.jsonl"},
        std::tuple{"acme", "greet", "repos/sample", "sample.jsonl"}}) {
    RemoteFarm farm;
    farm.add_fixture(owner, name, dir);
    TempDir work{"rr-replay"};
    auto replay = ReplayProvider::load(fixture_path(file));
    for (auto mode : kAllModes) {
      auto deps = offline_deps(farm, replay, work.path());
      const auto r = run_review(parse_repo_url(std::string("https://github.com/") + owner + "/" + name), mode, deps);
      CHECK_MESSAGE(r.ok, r.error);
    }
  }
}
