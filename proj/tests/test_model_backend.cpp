#include <doctest.h>

#include <atomic>
#include <thread>

#include "feedmem/model_backend.hpp"
#include "feedmem/wire_backend.hpp"
#include "test_support.hpp"

using namespace feedmem;
using feedmem::testing::TempDir;

namespace {

GenerationRequest simple_request(const std::string& user_text) {
  GenerationRequest r;
  r.messages.push_back(ChatMessage::make_user(user_text));
  return r;
}

GenerationResponse text_response(const std::string& text, std::int64_t in = 10,
                                 std::int64_t out = 5) {
  GenerationResponse r;
  r.message = ChatMessage::make_assistant(text);
  r.usage = {in, out, 1};
  r.finish_reason = FinishReason::stop;
  return r;
}

}  // namespace

TEST_CASE("token estimate follows ceil(chars/4)") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("12345678") == 2);
  CHECK(estimate_tokens("123456789") == 3);
  CHECK(estimate_tokens("1") == 1);
}

TEST_CASE("usage accumulates additively") {
  UsageStats total;
  std::vector<UsageStats> parts = {{3, 4, 1}, {10, 2, 1}, {0, 0, 1}};
  std::int64_t in = 0, out = 0, calls = 0;
  for (const auto& p : parts) {
    total += p;
    in += p.input_tokens;
    out += p.output_tokens;
    calls += p.calls;
  }
  CHECK(total.input_tokens == in);
  CHECK(total.output_tokens == out);
  CHECK(total.calls == calls);
}

TEST_CASE("record then replay reproduces responses in order") {
  TempDir dir;
  auto path = (dir.path() / "events.jsonl").string();

  std::vector<RecordedExchange> events;
  events.push_back({simple_request("q1"), text_response("a1")});
  events.push_back({simple_request("q2"), text_response("a2", 20, 9)});
  GenerationResponse with_tools;
  with_tools.message = ChatMessage::make_assistant("");
  with_tools.message.tool_calls.push_back({"call_1", "ls", Json{{"path", "/memories/"}}});
  with_tools.usage = {7, 3, 1};
  with_tools.finish_reason = FinishReason::tool_use;
  events.push_back({simple_request("q3"), with_tools});

  REQUIRE(record_transcript(events, path).ok());

  BackendConfig cfg;
  cfg.kind = BackendKind::replay;
  cfg.replay_path = path;
  cfg.model_name = "scripted";
  auto backend = ReplayBackend::open(cfg);
  REQUIRE(backend.ok());

  auto r1 = backend.value()->generate(simple_request("q1"));
  REQUIRE(r1.ok());
  CHECK(r1.value().message.text == "a1");
  CHECK(r1.value().usage.input_tokens == 10);

  auto r2 = backend.value()->generate(simple_request("q2"));
  REQUIRE(r2.ok());
  CHECK(r2.value().message.text == "a2");

  auto r3 = backend.value()->generate(simple_request("q3"));
  REQUIRE(r3.ok());
  CHECK(r3.value().finish_reason == FinishReason::tool_use);
  REQUIRE(r3.value().message.tool_calls.size() == 1);
  CHECK(r3.value().message.tool_calls[0].tool_name == "ls");

  auto exhausted = backend.value()->generate(simple_request("q4"));
  REQUIRE(!exhausted.ok());
  CHECK(exhausted.code() == Errc::replay_exhausted);
}

TEST_CASE("empty recording is valid and immediately exhausted") {
  TempDir dir;
  auto path = (dir.path() / "empty.jsonl").string();
  REQUIRE(record_transcript({}, path).ok());

  BackendConfig cfg;
  cfg.kind = BackendKind::replay;
  cfg.replay_path = path;
  auto backend = ReplayBackend::open(cfg);
  REQUIRE(backend.ok());
  CHECK(backend.value()->generate(simple_request("q")).code() == Errc::replay_exhausted);
}

TEST_CASE("strict replay flags diverging requests") {
  TempDir dir;
  auto path = (dir.path() / "strict.jsonl").string();
  REQUIRE(record_transcript({{simple_request("original"), text_response("a")}}, path).ok());

  BackendConfig cfg;
  cfg.kind = BackendKind::replay;
  cfg.replay_path = path;
  cfg.strict_replay = true;
  auto backend = ReplayBackend::open(cfg);
  REQUIRE(backend.ok());
  auto mismatch = backend.value()->generate(simple_request("different"));
  REQUIRE(!mismatch.ok());
  CHECK(mismatch.code() == Errc::replay_mismatch);

  auto fresh = ReplayBackend::open(cfg);
  REQUIRE(fresh.ok());
  CHECK(fresh.value()->generate(simple_request("original")).ok());
}

TEST_CASE("replay determinism: two replays of one file are byte-identical") {
  TempDir dir;
  auto path = (dir.path() / "det.jsonl").string();
  std::vector<RecordedExchange> events;
  for (int i = 0; i < 5; ++i)
    events.push_back({simple_request("q" + std::to_string(i)),
                      text_response("answer " + std::to_string(i), i, i * 2)});
  REQUIRE(record_transcript(events, path).ok());

  BackendConfig cfg;
  cfg.kind = BackendKind::replay;
  cfg.replay_path = path;
  auto run = [&]() {
    auto backend = ReplayBackend::open(cfg);
    REQUIRE(backend.ok());
    std::string acc;
    for (int i = 0; i < 5; ++i) {
      auto r = backend.value()->generate(simple_request("q" + std::to_string(i)));
      REQUIRE(r.ok());
      acc += message_to_json(r.value().message).dump() + usage_to_json(r.value().usage).dump();
    }
    return acc;
  };
  CHECK(run() == run());
}

TEST_CASE("wire backend retries an unreachable endpoint max_attempts times") {
  BackendConfig cfg;
  cfg.kind = BackendKind::wire;
  cfg.endpoint = "http://127.0.0.1:9/v1/chat/completions";  // discard port, nothing listens
  cfg.model_name = "m";
  cfg.retry.max_attempts = 3;
  WireBackend backend(cfg);

  std::atomic<int> sleeps{0};
  backend.set_sleeper([&](std::chrono::milliseconds) { ++sleeps; });

  auto result = backend.generate(simple_request("hello"));
  REQUIRE(!result.ok());
  CHECK(result.code() == Errc::transport_error);
  CHECK(sleeps.load() == 2);  // backoff between attempts only
}

namespace {

struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

}  // namespace

TEST_CASE("wire backend speaks the openai chat shape") {
  Json seen;
  std::string seen_auth;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    seen_auth = req.get_header_value("Authorization");
    Json reply{
        {"choices",
         Json::array({{{"message",
                        {{"role", "assistant"},
                         {"content", "hi there"},
                         {"tool_calls",
                          Json::array({{{"id", "call_7"},
                                        {"type", "function"},
                                        {"function",
                                         {{"name", "ls"},
                                          {"arguments", "{\"path\":\"/memories/\"}"}}}}})}}},
                       {"finish_reason", "tool_calls"}}})},
        {"usage", {{"prompt_tokens", 42}, {"completion_tokens", 11}}}};
    res.set_content(reply.dump(), "application/json");
  });
  REQUIRE(server.port > 0);

  setenv("FEEDMEM_TEST_KEY", "sk-test-sentinel", 1);
  BackendConfig cfg;
  cfg.kind = BackendKind::wire;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(server.port) + "/v1/chat/completions";
  cfg.model_name = "test-model";
  cfg.api_key_env = "FEEDMEM_TEST_KEY";
  WireBackend backend(cfg);

  GenerationRequest request;
  request.messages.push_back(ChatMessage::make_system("sys"));
  request.messages.push_back(ChatMessage::make_user("task"));
  request.tools = {{"ls", "list", {{"path", "string", true, "p"}}}};

  auto result = backend.generate(request);
  REQUIRE(result.ok());
  CHECK(result.value().message.text == "hi there");
  REQUIRE(result.value().message.tool_calls.size() == 1);
  CHECK(result.value().message.tool_calls[0].call_id == "call_7");
  CHECK(result.value().message.tool_calls[0].arguments.at("path") == "/memories/");
  CHECK(result.value().finish_reason == FinishReason::tool_use);
  CHECK(result.value().usage.input_tokens == 42);
  CHECK(result.value().usage.output_tokens == 11);

  CHECK(seen.at("model") == "test-model");
  CHECK(seen.at("messages").at(0).at("role") == "system");
  CHECK(seen.at("tools").at(0).at("function").at("name") == "ls");
  CHECK(seen_auth == "Bearer sk-test-sentinel");
}

TEST_CASE("wire backend speaks the anthropic messages shape") {
  Json seen;
  std::string seen_key;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    seen_key = req.get_header_value("x-api-key");
    Json reply{{"content", Json::array({{{"type", "text"}, {"text", "claude says hi"}}})},
               {"stop_reason", "end_turn"},
               {"usage", {{"input_tokens", 30}, {"output_tokens", 7}}}};
    res.set_content(reply.dump(), "application/json");
  });
  REQUIRE(server.port > 0);

  setenv("FEEDMEM_TEST_KEY", "sk-ant-sentinel", 1);
  BackendConfig cfg;
  cfg.kind = BackendKind::wire;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(server.port) + "/v1/chat/completions";
  cfg.model_name = "test-claude";
  cfg.api_key_env = "FEEDMEM_TEST_KEY";
  cfg.wire_format = WireFormat::anthropic_messages;
  WireBackend backend(cfg);

  GenerationRequest request;
  request.messages.push_back(ChatMessage::make_system("sys prompt"));
  request.messages.push_back(ChatMessage::make_user("task"));
  ChatMessage assistant = ChatMessage::make_assistant("");
  assistant.tool_calls.push_back({"toolu_1", "ls", Json{{"path", "/memories/"}}});
  request.messages.push_back(assistant);
  request.messages.push_back(ChatMessage::make_tool("toolu_1", "(empty)"));
  request.tools = {{"ls", "list", {{"path", "string", true, "p"}}}};

  auto result = backend.generate(request);
  REQUIRE(result.ok());
  CHECK(result.value().message.text == "claude says hi");
  CHECK(result.value().usage.input_tokens == 30);

  CHECK(seen.at("system") == "sys prompt");
  CHECK(seen.at("tools").at(0).contains("input_schema"));
  // Tool result rides in a user turn with a tool_result block.
  const auto& last = seen.at("messages").back();
  CHECK(last.at("role") == "user");
  CHECK(last.at("content").at(0).at("type") == "tool_result");
  CHECK(seen_key == "sk-ant-sentinel");
}

TEST_CASE("api keys never leak into replay files") {
  TempDir dir;
  setenv("FEEDMEM_TEST_KEY", "sk-leaky-sentinel", 1);

  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    Json reply{{"choices", Json::array({{{"message", {{"role", "assistant"},
                                                      {"content", "fine"}}},
                                         {"finish_reason", "stop"}}})},
               {"usage", {{"prompt_tokens", 1}, {"completion_tokens", 1}}}};
    res.set_content(reply.dump(), "application/json");
  });
  REQUIRE(server.port > 0);

  BackendConfig cfg;
  cfg.kind = BackendKind::wire;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(server.port) + "/v1/chat/completions";
  cfg.model_name = "m";
  cfg.api_key_env = "FEEDMEM_TEST_KEY";
  WireBackend wire(cfg);
  RecordingBackend recorder(wire);

  REQUIRE(recorder.generate(simple_request("hello")).ok());
  auto path = (dir.path() / "capture.jsonl").string();
  REQUIRE(recorder.save(path).ok());

  auto contents = feedmem::testing::read_text_file(path);
  CHECK(contents.find("sk-leaky-sentinel") == std::string::npos);
  CHECK(contents.find("FEEDMEM_TEST_KEY") == std::string::npos);
}
