#include <doctest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "agriqa/error.hpp"
#include "agriqa/llm_gateway.hpp"

using namespace agriqa;
using namespace agriqa::llm;

namespace {

CompletionRequest request(std::string user, std::string provider = "mock") {
  CompletionRequest r;
  r.messages = {{Role::System, "sys"}, {Role::User, std::move(user)}};
  r.provider = std::move(provider);
  return r;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an agriqa::Error");
  return ErrorCode::InvalidInput;
}

const char* kTranscript =
    "# comment before the first block\n"
    "promoter\n"
    "Action: promoter_enrichment\n"
    "---\n"
    "re:^obs(ervation)? \\d+\n"
    "saw a number\n"
    "second line\n"
    "---\n"
    "*\n"
    "Final: I don't know\n";

}  // namespace

TEST_CASE("scripted provider: first match wins, catch-all last") {
  Gateway gw;
  gw.register_provider("mock", ScriptedTranscript::parse(kTranscript));
  CHECK(gw.complete(request("predict promoter enrichment")) == "Action: promoter_enrichment");
  CHECK(gw.complete(request("hello")) == "Final: I don't know");
  CHECK(gw.complete(request("Observation 42")) == "saw a number\nsecond line");
  CHECK(gw.complete(request("PROMOTER")) == "Action: promoter_enrichment");
}

TEST_CASE("scripted provider matches the last user or tool message") {
  Gateway gw;
  gw.register_provider("mock", ScriptedTranscript::parse(kTranscript));
  auto r = request("predict promoter enrichment");
  r.messages.push_back({Role::Assistant, "obs 1"});
  CHECK(gw.complete(r) == "Action: promoter_enrichment");
  r.messages.push_back({Role::ToolResult, "obs 7"});
  CHECK(gw.complete(r) == "saw a number\nsecond line");
}

TEST_CASE("replaying a five-turn episode is byte-identical") {
  auto run = [] {
    Gateway gw;
    gw.register_provider("mock", ScriptedTranscript::parse(kTranscript));
    std::vector<std::string> out;
    auto r = request("predict promoter enrichment");
    for (int turn = 0; turn < 5; ++turn) {
      auto reply = gw.complete(r);
      out.push_back(reply);
      r.messages.push_back({Role::Assistant, reply});
      r.messages.push_back({Role::ToolResult, turn % 2 == 0 ? "obs " + std::to_string(turn) : "nothing"});
    }
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("transcripts require a catch-all") {
  CHECK(code_of([] { ScriptedTranscript::parse("promoter\nx\n"); }) == ErrorCode::InvalidInput);
  ScriptedTranscript t = ScriptedTranscript::parse(kTranscript);
  CHECK(t.entries().size() == 3);
}

TEST_CASE("registry errors") {
  Gateway gw;
  gw.register_provider("mock", ScriptedTranscript::parse(kTranscript));
  CHECK(gw.has_provider("mock"));
  CHECK(code_of([&] { gw.register_provider("mock", ScriptedTranscript::parse(kTranscript)); }) ==
        ErrorCode::DuplicateProvider);
  CHECK(code_of([&] { gw.complete(request("x", "other")); }) == ErrorCode::ProviderNotFound);
}

TEST_CASE("request validation") {
  Gateway gw;
  gw.register_provider("mock", ScriptedTranscript::parse(kTranscript));
  auto bad_first = request("x");
  bad_first.messages.front().role = Role::Assistant;
  CHECK(code_of([&] { gw.complete(bad_first); }) == ErrorCode::InvalidInput);
  auto hot = request("x");
  hot.temperature = 2.5;
  CHECK(code_of([&] { gw.complete(hot); }) == ErrorCode::InvalidInput);
  auto empty = request("x");
  empty.messages.clear();
  CHECK(code_of([&] { gw.complete(empty); }) == ErrorCode::InvalidInput);
  auto huge = request(std::string(kDefaultMaxContent + 1, 'x'));
  CHECK(code_of([&] { gw.complete(huge); }) == ErrorCode::InvalidInput);
}

TEST_CASE("remote provider wire format") {
  RemoteProvider p({"http://127.0.0.1:1", "/v1/chat/completions", "m1", "", std::chrono::milliseconds(500), 1});
  auto body = nlohmann::json::parse(p.request_body(request("hi")));
  CHECK(body["model"] == "m1");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["content"] == "hi");
  CHECK(RemoteProvider::parse_response(R"({"choices":[{"message":{"content":"ok"}}]})") == "ok");
  CHECK(code_of([] { RemoteProvider::parse_response("{}"); }) == ErrorCode::UpstreamError);
}

TEST_CASE("remote provider against a local server") {
  httplib::Server srv;
  std::string seen_auth;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto j = nlohmann::json::parse(req.body);
    std::string last = j["messages"].back()["content"];
    if (last == "fail") {
      res.status = 503;
      res.set_content("overloaded", "text/plain");
      return;
    }
    res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", "echo: " + last}}}}}}}.dump(),
                    "application/json");
  });
  int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  ::setenv("AGRIQA_TEST_KEY", "secret", 1);
  Gateway gw;
  gw.register_provider("remote", RemoteEndpoint{"http://127.0.0.1:" + std::to_string(port), "/v1/chat/completions",
                                                "m", "AGRIQA_TEST_KEY", std::chrono::milliseconds(2000), 1});
  CHECK(gw.complete(request("hello", "remote")) == "echo: hello");
  CHECK(seen_auth == "Bearer secret");
  try {
    gw.complete(request("fail", "remote"));
    FAIL("expected UpstreamError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UpstreamError);
    CHECK(std::string(e.what()).find("503") != std::string::npos);
  }
  srv.stop();
  th.join();
}

TEST_CASE("unreachable remote endpoint is an upstream error") {
  Gateway gw;
  gw.register_provider("remote",
                       RemoteEndpoint{"http://127.0.0.1:9", "/v1/chat/completions", "m", "", std::chrono::milliseconds(300), 1});
  CHECK(code_of([&] { gw.complete(request("x", "remote")); }) == ErrorCode::UpstreamError);
}

TEST_CASE("an unmatched message exhausts the script") {
  Gateway gw;
  gw.register_provider("mock", ScriptedTranscript::unchecked({{"promoter", "Action: promoter_enrichment"}}));
  CHECK(gw.complete(request("promoter please")) == "Action: promoter_enrichment");
  CHECK(code_of([&] { gw.complete(request("hello")); }) == ErrorCode::ScriptExhausted);
}
