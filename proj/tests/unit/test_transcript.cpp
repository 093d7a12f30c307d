#include <doctest.h>

#include <algorithm>

#include "reporeview/transcript.hpp"
#include "support.hpp"

using namespace reporeview;
using namespace reporeview::testing;

namespace {

ModelRequest request(std::string user) {
  return ModelRequest{"m", {{Role::system, "sys"}, {Role::user, std::move(user)}}, 0.0, 100};
}

class CountingStub final : public Provider {
 public:
  ModelResponse complete(const ModelRequest& r) override {
    ++calls;
    return ModelResponse{"echo:" + r.messages.back().content, 7, 8, 9, 1};
  }
  int calls = 0;
};

}  // namespace

TEST_CASE("record then replay returns identical responses") {
  TempDir dir;
  const auto file = dir / "t.jsonl";
  auto live = std::make_shared<CountingStub>();
  std::vector<ModelResponse> recorded;
  {
    RecordingProvider rec(live, file);
    for (const auto* u : {"a", "b", "c"}) recorded.push_back(rec.complete(request(u)));
  }
  CHECK(live->calls == 3);
  auto replay = ReplayProvider::load(file);
  CHECK(replay->size() == 3);
  CHECK(replay->complete(request("a")) == recorded[0]);
  CHECK(replay->complete(request("c")) == recorded[2]);
  CHECK(live->calls == 3);

  const auto lines = read_file(file);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 3);
  const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  CHECK(first["request_hash"] == request_hash(request("a")));
  CHECK(first.contains("request"));
  CHECK(first.contains("response"));
}

TEST_CASE("replay miss names the request hash") {
  TempDir dir;
  write_file(dir / "t.jsonl", "");
  auto replay = ReplayProvider::load(dir / "t.jsonl");
  const auto hash = request_hash(request("z"));
  try {
    replay->complete(request("z"));
    FAIL("expected a miss");
  } catch (const ProviderError& e) {
    CHECK(e.kind() == ProviderErrorKind::replay_miss);
    CHECK(std::string(e.what()).find(hash) != std::string::npos);
    CHECK_FALSE(is_retryable(e.kind()));
  }
}

TEST_CASE("corrupt transcript line is reported with its number") {
  TempDir dir;
  const auto file = dir / "t.jsonl";
  {
    RecordingProvider rec(std::make_shared<CountingStub>(), file);
    rec.complete(request("a"));
    rec.complete(request("b"));
  }
  write_file(file, read_file(file) + "garbage\n");
  try {
    ReplayProvider::load(file);
    FAIL("expected a load error");
  } catch (const TranscriptLoadError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("a transcript directory loads every jsonl file") {
  TempDir dir;
  {
    RecordingProvider a(std::make_shared<CountingStub>(), dir / "one.jsonl");
    a.complete(request("a"));
    RecordingProvider b(std::make_shared<CountingStub>(), dir / "two.jsonl");
    b.complete(request("b"));
  }
  write_file(dir / "notes.txt", "ignored");
  auto replay = ReplayProvider::load(dir.path());
  CHECK(replay->size() == 2);
  CHECK(replay->complete(request("b")).text == "echo:b");
}

TEST_CASE("failed calls are not recorded") {
  TempDir dir;
  {
    RecordingProvider rec(std::make_shared<FailingProvider>(), dir / "t.jsonl");
    CHECK_THROWS_AS(rec.complete(request("a")), ProviderError);
  }
  CHECK(read_file(dir / "t.jsonl").empty());
}
