#pragma once

// Generation backend abstraction: one blocking generate() call per turn.
// Two kinds are configurable: a wire client for chat-completion APIs
// (wire_backend.hpp) and a deterministic record/replay backend for tests.

#include <cmath>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "feedmem/chat.hpp"

namespace feedmem {

enum class FinishReason { stop, tool_use, length, error };

inline const char* finish_reason_name(FinishReason f) {
  switch (f) {
    case FinishReason::stop: return "stop";
    case FinishReason::tool_use: return "tool_use";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "stop";
}

inline FinishReason parse_finish_reason(std::string_view s) {
  if (s == "tool_use") return FinishReason::tool_use;
  if (s == "length") return FinishReason::length;
  if (s == "error") return FinishReason::error;
  return FinishReason::stop;
}

struct GenerationRequest {
  std::vector<ChatMessage> messages;
  std::vector<ToolSpec> tools;
  double temperature = 0.7;
  int max_output_tokens = 4096;
};

struct GenerationResponse {
  ChatMessage message;  // assistant turn
  UsageStats usage;
  FinishReason finish_reason = FinishReason::stop;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{250};
};

enum class BackendKind { wire, replay };
enum class WireFormat { openai_chat, anthropic_messages };

struct BackendConfig {
  BackendKind kind = BackendKind::replay;
  std::string endpoint;      // wire: e.g. https://api.openai.com/v1/chat/completions
  std::string model_name;
  std::string api_key_env;   // name of the env var holding the key; never stored
  RetryPolicy retry;
  std::string replay_path;   // replay: line-delimited JSON transcript
  WireFormat wire_format = WireFormat::openai_chat;
  bool strict_replay = false;  // verify request hashes against the recording
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Result<GenerationResponse> generate(const GenerationRequest& request) = 0;
  virtual std::string model_name() const { return "unknown"; }
};

// ---------------------------------------------------------------------------
// Token estimation fallback for backends that report no usage.
// Documented rule: ceil(character_count / 4).

inline std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

inline std::string request_text(const GenerationRequest& request) {
  std::string all;
  for (const auto& m : request.messages) {
    all += m.text;
    for (const auto& c : m.tool_calls) all += c.arguments.dump();
  }
  return all;
}

inline std::string response_text(const ChatMessage& message) {
  std::string all = message.text;
  for (const auto& c : message.tool_calls) {
    all += c.tool_name;
    all += c.arguments.dump();
  }
  return all;
}

inline UsageStats estimate_usage(const GenerationRequest& request, const ChatMessage& message) {
  return UsageStats{estimate_tokens(request_text(request)),
                    estimate_tokens(response_text(message)), 1};
}

// ---------------------------------------------------------------------------
// Canonical request fingerprint for strict replay matching.

inline std::string request_hash(const GenerationRequest& request) {
  Json j = Json::object();
  Json msgs = Json::array();
  for (const auto& m : request.messages) msgs.push_back(message_to_json(m));
  j["messages"] = msgs;
  Json tool_names = Json::array();
  for (const auto& t : request.tools) tool_names.push_back(t.name);
  j["tools"] = tool_names;
  return to_hex(fnv1a64(j.dump()));
}

// ---------------------------------------------------------------------------
// Replay files: line-delimited JSON, one generate() event per line.
//   {"v":1,"request_hash":...,"assistant_text":...,"tool_calls":[...],
//    "usage":{...},"finish_reason":...}

struct ReplayEvent {
  std::string request_hash;
  ChatMessage message;  // assistant
  UsageStats usage;
  FinishReason finish_reason = FinishReason::stop;
};

inline Json replay_event_to_json(const ReplayEvent& e) {
  Json j{{"v", 1},
         {"request_hash", e.request_hash},
         {"assistant_text", e.message.text},
         {"usage", usage_to_json(e.usage)},
         {"finish_reason", finish_reason_name(e.finish_reason)}};
  Json calls = Json::array();
  for (const auto& c : e.message.tool_calls) calls.push_back(tool_call_to_json(c));
  j["tool_calls"] = calls;
  return j;
}

inline Result<ReplayEvent> replay_event_from_json(const Json& j) {
  if (!j.is_object() || j.value("v", 0) != 1)
    return make_error(Errc::parse_error, "unsupported replay event version");
  ReplayEvent e;
  e.request_hash = j.value("request_hash", "");
  e.message = ChatMessage::make_assistant(j.value("assistant_text", ""));
  for (const auto& c : j.value("tool_calls", Json::array())) {
    auto call = tool_call_from_json(c);
    if (!call.ok()) return call.error();
    e.message.tool_calls.push_back(call.take());
  }
  e.usage = usage_from_json(j.value("usage", Json::object()));
  e.finish_reason = parse_finish_reason(j.value("finish_reason", "stop"));
  return e;
}

struct RecordedExchange {
  GenerationRequest request;
  GenerationResponse response;
};

inline Status record_transcript(const std::vector<RecordedExchange>& events,
                                const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return make_error(Errc::io_error, "cannot write " + path);
  for (const auto& ev : events) {
    ReplayEvent line{request_hash(ev.request), ev.response.message, ev.response.usage,
                     ev.response.finish_reason};
    out << replay_event_to_json(line).dump() << "\n";
  }
  return out.good() ? ok_status() : Status(make_error(Errc::io_error, "short write: " + path));
}

inline Result<std::vector<ReplayEvent>> load_replay_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return make_error(Errc::io_error, "cannot open replay file " + path);
  std::vector<ReplayEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded())
      return make_error(Errc::parse_error,
                        path + ":" + std::to_string(lineno) + ": invalid JSON");
    auto ev = replay_event_from_json(j);
    if (!ev.ok()) return ev.error();
    events.push_back(ev.take());
  }
  return events;
}

// Positional replay: the n-th generate() call gets the n-th recorded
// response. Strict mode additionally requires the request fingerprint to
// match the recording.
class ReplayBackend final : public Backend {
 public:
  ReplayBackend(std::vector<ReplayEvent> events, std::string model_name,
                bool strict = false)
      : events_(std::move(events)), model_(std::move(model_name)), strict_(strict) {}

  static Result<std::unique_ptr<ReplayBackend>> open(const BackendConfig& cfg) {
    auto events = load_replay_file(cfg.replay_path);
    if (!events.ok()) return events.error();
    return std::make_unique<ReplayBackend>(events.take(),
                                           cfg.model_name.empty() ? "replay" : cfg.model_name,
                                           cfg.strict_replay);
  }

  Result<GenerationResponse> generate(const GenerationRequest& request) override {
    if (cursor_ >= events_.size())
      return make_error(Errc::replay_exhausted,
                        "recording ended after " + std::to_string(events_.size()) + " events");
    const ReplayEvent& ev = events_[cursor_];
    if (strict_) {
      auto h = request_hash(request);
      if (h != ev.request_hash)
        return make_error(Errc::replay_mismatch,
                          "request " + std::to_string(cursor_) + " diverges from recording");
    }
    ++cursor_;
    return GenerationResponse{ev.message, ev.usage, ev.finish_reason};
  }

  std::string model_name() const override { return model_; }
  std::size_t remaining() const { return events_.size() - cursor_; }

 private:
  std::vector<ReplayEvent> events_;
  std::string model_;
  bool strict_ = false;
  std::size_t cursor_ = 0;
};

// Wraps another backend and captures every successful exchange so a live
// run can be replayed forever.
class RecordingBackend final : public Backend {
 public:
  explicit RecordingBackend(Backend& inner) : inner_(inner) {}

  Result<GenerationResponse> generate(const GenerationRequest& request) override {
    auto response = inner_.generate(request);
    if (response.ok()) events_.push_back({request, response.value()});
    return response;
  }

  std::string model_name() const override { return inner_.model_name(); }
  const std::vector<RecordedExchange>& events() const { return events_; }
  Status save(const std::string& path) const { return record_transcript(events_, path); }

 private:
  Backend& inner_;
  std::vector<RecordedExchange> events_;
};

}  // namespace feedmem
