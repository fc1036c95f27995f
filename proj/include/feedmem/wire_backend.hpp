#pragma once

// HTTP client for chat-completion APIs with tool calling. One generic
// request/response shape, with thin adapters for the two common field
// spellings (OpenAI-style chat completions and Anthropic-style messages).
//
// Retries transport failures and 5xx/429 responses with exponential
// backoff plus jitter. The API key is read from the configured environment
// variable at call time and never stored or logged.

#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>

#include "feedmem/model_backend.hpp"

namespace feedmem {

namespace wire_detail {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // /v1/...
};

inline Result<Endpoint> parse_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    return make_error(Errc::config_error, "endpoint must include a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return Endpoint{url, "/"};
  return Endpoint{url.substr(0, path_start), url.substr(path_start)};
}

// --- OpenAI-style chat completions -----------------------------------------

inline Json to_openai_request(const BackendConfig& cfg, const GenerationRequest& req) {
  Json messages = Json::array();
  for (const auto& m : req.messages) {
    switch (m.role) {
      case Role::system:
        messages.push_back({{"role", "system"}, {"content", m.text}});
        break;
      case Role::user:
        messages.push_back({{"role", "user"}, {"content", m.text}});
        break;
      case Role::assistant: {
        Json msg{{"role", "assistant"}, {"content", m.text}};
        if (!m.tool_calls.empty()) {
          Json calls = Json::array();
          for (const auto& c : m.tool_calls)
            calls.push_back({{"id", c.call_id},
                             {"type", "function"},
                             {"function", {{"name", c.tool_name},
                                           {"arguments", c.arguments.dump()}}}});
          msg["tool_calls"] = calls;
        }
        messages.push_back(msg);
        break;
      }
      case Role::tool:
        messages.push_back({{"role", "tool"}, {"tool_call_id", m.call_id},
                            {"content", m.text}});
        break;
    }
  }
  Json body{{"model", cfg.model_name},
            {"messages", messages},
            {"temperature", req.temperature},
            {"max_tokens", req.max_output_tokens}};
  if (!req.tools.empty()) {
    Json tools = Json::array();
    for (const auto& spec : req.tools)
      tools.push_back({{"type", "function"}, {"function", tool_spec_schema(spec)}});
    body["tools"] = tools;
  }
  return body;
}

inline Result<GenerationResponse> from_openai_response(const Json& j,
                                                       const GenerationRequest& req) {
  if (!j.contains("choices") || !j.at("choices").is_array() || j.at("choices").empty())
    return make_error(Errc::transport_error, "response has no choices");
  const Json& choice = j.at("choices").at(0);
  const Json& msg = choice.value("message", Json::object());

  GenerationResponse out;
  out.message = ChatMessage::make_assistant(
      msg.contains("content") && msg.at("content").is_string()
          ? msg.at("content").get<std::string>()
          : "");
  for (const auto& c : msg.value("tool_calls", Json::array())) {
    ToolCall call;
    call.call_id = c.value("id", "");
    call.tool_name = c.value("function", Json::object()).value("name", "");
    auto args_text = c.value("function", Json::object()).value("arguments", "{}");
    Json args = Json::parse(args_text, nullptr, false);
    call.arguments = args.is_discarded() ? Json::object() : args;
    out.message.tool_calls.push_back(std::move(call));
  }

  if (j.contains("usage") && j.at("usage").is_object()) {
    out.usage.input_tokens = j.at("usage").value("prompt_tokens", std::int64_t{0});
    out.usage.output_tokens = j.at("usage").value("completion_tokens", std::int64_t{0});
    out.usage.calls = 1;
  } else {
    out.usage = estimate_usage(req, out.message);
  }

  auto reason = choice.value("finish_reason", "stop");
  if (!out.message.tool_calls.empty()) out.finish_reason = FinishReason::tool_use;
  else if (reason == "length") out.finish_reason = FinishReason::length;
  else out.finish_reason = FinishReason::stop;
  return out;
}

// --- Anthropic-style messages ----------------------------------------------

inline Json to_anthropic_request(const BackendConfig& cfg, const GenerationRequest& req) {
  Json body{{"model", cfg.model_name},
            {"max_tokens", req.max_output_tokens},
            {"temperature", req.temperature}};
  Json messages = Json::array();
  for (const auto& m : req.messages) {
    switch (m.role) {
      case Role::system:
        body["system"] = m.text;
        break;
      case Role::user:
        messages.push_back({{"role", "user"},
                            {"content", Json::array({{{"type", "text"}, {"text", m.text}}})}});
        break;
      case Role::assistant: {
        Json content = Json::array();
        if (!m.text.empty()) content.push_back({{"type", "text"}, {"text", m.text}});
        for (const auto& c : m.tool_calls)
          content.push_back({{"type", "tool_use"}, {"id", c.call_id},
                             {"name", c.tool_name}, {"input", c.arguments}});
        messages.push_back({{"role", "assistant"}, {"content", content}});
        break;
      }
      case Role::tool: {
        Json block{{"type", "tool_result"}, {"tool_use_id", m.call_id}, {"content", m.text}};
        // Tool results must ride in the user turn that follows the
        // assistant's tool_use; consecutive results merge into one turn.
        if (!messages.empty() && messages.back().value("role", "") == "user" &&
            !messages.back()["content"].empty() &&
            messages.back()["content"].back().value("type", "") == "tool_result") {
          messages.back()["content"].push_back(block);
        } else {
          messages.push_back({{"role", "user"}, {"content", Json::array({block})}});
        }
        break;
      }
    }
  }
  body["messages"] = messages;
  if (!req.tools.empty()) {
    Json tools = Json::array();
    for (const auto& spec : req.tools) {
      Json schema = tool_spec_schema(spec);
      tools.push_back({{"name", schema.at("name")},
                       {"description", schema.at("description")},
                       {"input_schema", schema.at("parameters")}});
    }
    body["tools"] = tools;
  }
  return body;
}

inline Result<GenerationResponse> from_anthropic_response(const Json& j,
                                                          const GenerationRequest& req) {
  if (!j.contains("content") || !j.at("content").is_array())
    return make_error(Errc::transport_error, "response has no content blocks");
  GenerationResponse out;
  out.message = ChatMessage::make_assistant("");
  for (const auto& block : j.at("content")) {
    auto type = block.value("type", "");
    if (type == "text") {
      if (!out.message.text.empty()) out.message.text += "\n";
      out.message.text += block.value("text", "");
    } else if (type == "tool_use") {
      ToolCall call;
      call.call_id = block.value("id", "");
      call.tool_name = block.value("name", "");
      call.arguments = block.value("input", Json::object());
      out.message.tool_calls.push_back(std::move(call));
    }
  }
  if (j.contains("usage") && j.at("usage").is_object()) {
    out.usage.input_tokens = j.at("usage").value("input_tokens", std::int64_t{0});
    out.usage.output_tokens = j.at("usage").value("output_tokens", std::int64_t{0});
    out.usage.calls = 1;
  } else {
    out.usage = estimate_usage(req, out.message);
  }
  auto reason = j.value("stop_reason", "end_turn");
  if (!out.message.tool_calls.empty()) out.finish_reason = FinishReason::tool_use;
  else if (reason == "max_tokens") out.finish_reason = FinishReason::length;
  else out.finish_reason = FinishReason::stop;
  return out;
}

}  // namespace wire_detail

class WireBackend final : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit WireBackend(BackendConfig cfg)
      : cfg_(std::move(cfg)),
        sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
        jitter_rng_(0x5eed) {}

  // Test hook: count/skip backoff sleeps instead of waiting.
  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }

  Result<GenerationResponse> generate(const GenerationRequest& request) override {
    auto endpoint = wire_detail::parse_endpoint(cfg_.endpoint);
    if (!endpoint.ok()) return endpoint.error();

    Json body = cfg_.wire_format == WireFormat::anthropic_messages
                    ? wire_detail::to_anthropic_request(cfg_, request)
                    : wire_detail::to_openai_request(cfg_, request);

    httplib::Headers headers{{"Content-Type", "application/json"}};
    if (!cfg_.api_key_env.empty()) {
      const char* key = std::getenv(cfg_.api_key_env.c_str());
      if (key && *key) {
        if (cfg_.wire_format == WireFormat::anthropic_messages) {
          headers.emplace("x-api-key", key);
          headers.emplace("anthropic-version", "2023-06-01");
        } else {
          headers.emplace("Authorization", std::string("Bearer ") + key);
        }
      }
    }

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (endpoint.value().base.rfind("https://", 0) == 0)
      return make_error(Errc::transport_error,
                        "built without TLS support; https endpoints unavailable");
#endif

    std::string last_error;
    int max_attempts = std::max(1, cfg_.retry.max_attempts);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
      if (attempt > 1) sleeper_(backoff_delay(attempt));
      httplib::Result res;
      try {
        httplib::Client client(endpoint.value().base);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        res = client.Post(endpoint.value().path, headers, body.dump(), "application/json");
      } catch (const std::exception& e) {
        return make_error(Errc::transport_error, std::string("bad endpoint: ") + e.what());
      }
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500 || res->status == 429) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        return make_error(Errc::transport_error,
                          "HTTP " + std::to_string(res->status) + ": " + res->body);
      Json j = Json::parse(res->body, nullptr, false);
      if (j.is_discarded())
        return make_error(Errc::transport_error, "response is not valid JSON");
      return cfg_.wire_format == WireFormat::anthropic_messages
                 ? wire_detail::from_anthropic_response(j, request)
                 : wire_detail::from_openai_response(j, request);
    }
    return make_error(Errc::transport_error,
                      last_error + " after " + std::to_string(max_attempts) + " attempts");
  }

  std::string model_name() const override { return cfg_.model_name; }

 private:
  std::chrono::milliseconds backoff_delay(int attempt) {
    auto base = cfg_.retry.base_backoff.count();
    double factor = static_cast<double>(1ll << std::min(attempt - 2, 10));
    std::uniform_real_distribution<double> jitter(0.5, 1.0);
    return std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(base) * factor * jitter(jitter_rng_)));
  }

  BackendConfig cfg_;
  Sleeper sleeper_;
  std::mt19937_64 jitter_rng_;
};

}  // namespace feedmem
