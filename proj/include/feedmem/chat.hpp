#pragma once

// Conversation vocabulary shared by the tool protocol, the generation
// backends and the agent runtime.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "feedmem/core.hpp"

namespace feedmem {

using Json = nlohmann::json;

enum class Role { system, user, assistant, tool };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
  }
  return "user";
}

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  if (s == "tool") return Role::tool;
  return std::nullopt;
}

struct ToolCall {
  std::string call_id;    // unique within a transcript
  std::string tool_name;
  Json arguments = Json::object();
};

struct ChatMessage {
  Role role = Role::user;
  std::string text;
  std::vector<ToolCall> tool_calls;  // assistant messages only
  std::string call_id;               // tool messages only

  static ChatMessage make_system(std::string text) { return {Role::system, std::move(text), {}, {}}; }
  static ChatMessage make_user(std::string text) { return {Role::user, std::move(text), {}, {}}; }
  static ChatMessage make_assistant(std::string text) { return {Role::assistant, std::move(text), {}, {}}; }
  static ChatMessage make_tool(std::string call_id, std::string text) {
    ChatMessage m{Role::tool, std::move(text), {}, std::move(call_id)};
    return m;
  }
};

struct UsageStats {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t calls = 0;

  UsageStats& operator+=(const UsageStats& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    calls += o.calls;
    return *this;
  }
  std::int64_t total_tokens() const { return input_tokens + output_tokens; }
};

inline UsageStats operator+(UsageStats a, const UsageStats& b) { return a += b; }

struct ToolParam {
  std::string name;
  std::string type;  // "string" | "array[string]"
  bool required = true;
  std::string description;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<ToolParam> parameters;
};

// Generic function-calling schema shape (name, description, parameter
// object) shared by all wire adapters and the exported tool definitions.
inline Json tool_spec_schema(const ToolSpec& spec) {
  Json props = Json::object();
  Json required = Json::array();
  for (const auto& p : spec.parameters) {
    if (p.type == "array[string]")
      props[p.name] = {{"type", "array"},
                       {"items", {{"type", "string"}}},
                       {"description", p.description}};
    else
      props[p.name] = {{"type", "string"}, {"description", p.description}};
    if (p.required) required.push_back(p.name);
  }
  return Json{{"name", spec.name},
              {"description", spec.description},
              {"parameters", {{"type", "object"},
                              {"properties", props},
                              {"required", required}}}};
}

inline Json tool_specs_schema(const std::vector<ToolSpec>& specs) {
  Json out = Json::array();
  for (const auto& s : specs) out.push_back(tool_spec_schema(s));
  return out;
}

// ---------------------------------------------------------------------------
// JSON codecs (used by transcripts and replay files).

inline Json tool_call_to_json(const ToolCall& c) {
  return Json{{"call_id", c.call_id}, {"name", c.tool_name}, {"arguments", c.arguments}};
}

inline Result<ToolCall> tool_call_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("name"))
    return make_error(Errc::parse_error, "malformed tool call");
  ToolCall c;
  c.call_id = j.value("call_id", "");
  c.tool_name = j.at("name").get<std::string>();
  c.arguments = j.value("arguments", Json::object());
  return c;
}

inline Json message_to_json(const ChatMessage& m) {
  Json j{{"role", role_name(m.role)}, {"text", m.text}};
  if (!m.call_id.empty()) j["call_id"] = m.call_id;
  if (!m.tool_calls.empty()) {
    Json calls = Json::array();
    for (const auto& c : m.tool_calls) calls.push_back(tool_call_to_json(c));
    j["tool_calls"] = calls;
  }
  return j;
}

inline Result<ChatMessage> message_from_json(const Json& j) {
  if (!j.is_object()) return make_error(Errc::parse_error, "message is not an object");
  auto role = parse_role(j.value("role", ""));
  if (!role) return make_error(Errc::parse_error, "unknown role");
  ChatMessage m;
  m.role = *role;
  m.text = j.value("text", "");
  m.call_id = j.value("call_id", "");
  if (j.contains("tool_calls")) {
    for (const auto& c : j.at("tool_calls")) {
      auto call = tool_call_from_json(c);
      if (!call.ok()) return call.error();
      m.tool_calls.push_back(call.take());
    }
  }
  return m;
}

inline Json usage_to_json(const UsageStats& u) {
  return Json{{"input_tokens", u.input_tokens},
              {"output_tokens", u.output_tokens},
              {"calls", u.calls}};
}

inline UsageStats usage_from_json(const Json& j) {
  UsageStats u;
  if (j.is_object()) {
    u.input_tokens = j.value("input_tokens", std::int64_t{0});
    u.output_tokens = j.value("output_tokens", std::int64_t{0});
    u.calls = j.value("calls", std::int64_t{0});
  }
  return u;
}

}  // namespace feedmem
