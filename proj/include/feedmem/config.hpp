#pragma once

// Run configuration files. Both JSON (.json) and a practical TOML subset
// (anything else) are accepted; the TOML subset covers table headers,
// dotted/quoted keys, basic strings, numbers, booleans and single-line
// arrays, which is everything a RunConfig needs.
//
// Relative paths inside a config resolve against the config file's
// directory, so runs behave the same from any working directory.

#include <filesystem>

#include "feedmem/harness.hpp"

namespace feedmem::config {

using harness::JudgeKind;
using harness::Protocol;
using harness::RunConfig;

// ---------------------------------------------------------------------------
// TOML subset -> JSON

namespace detail {

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;
  bool eof() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
};

inline void skip_ws(Cursor& c) {
  while (!c.eof() && (c.peek() == ' ' || c.peek() == '\t')) ++c.pos;
}

inline Result<std::string> parse_basic_string(Cursor& c) {
  if (c.eof() || c.peek() != '"') return make_error(Errc::parse_error, "expected '\"'");
  ++c.pos;
  std::string out;
  while (!c.eof()) {
    char ch = c.text[c.pos++];
    if (ch == '"') return out;
    if (ch == '\\') {
      if (c.eof()) break;
      char esc = c.text[c.pos++];
      switch (esc) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: return make_error(Errc::parse_error, std::string("bad escape \\") + esc);
      }
      continue;
    }
    out += ch;
  }
  return make_error(Errc::parse_error, "unterminated string");
}

inline Result<std::string> parse_key_segment(Cursor& c) {
  skip_ws(c);
  if (!c.eof() && c.peek() == '"') return parse_basic_string(c);
  std::string out;
  while (!c.eof()) {
    char ch = c.peek();
    if ((ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
        ch == '_' || ch == '-') {
      out += ch;
      ++c.pos;
    } else {
      break;
    }
  }
  if (out.empty()) return make_error(Errc::parse_error, "expected a key");
  return out;
}

inline Result<Json> parse_value(Cursor& c);

inline Result<Json> parse_array(Cursor& c) {
  ++c.pos;  // consume '['
  Json arr = Json::array();
  skip_ws(c);
  if (!c.eof() && c.peek() == ']') {
    ++c.pos;
    return arr;
  }
  while (true) {
    auto v = parse_value(c);
    if (!v.ok()) return v;
    arr.push_back(v.value());
    skip_ws(c);
    if (c.eof()) return make_error(Errc::parse_error, "unterminated array");
    if (c.peek() == ',') {
      ++c.pos;
      skip_ws(c);
      continue;
    }
    if (c.peek() == ']') {
      ++c.pos;
      return arr;
    }
    return make_error(Errc::parse_error, "expected ',' or ']' in array");
  }
}

inline Result<Json> parse_value(Cursor& c) {
  skip_ws(c);
  if (c.eof()) return make_error(Errc::parse_error, "expected a value");
  char ch = c.peek();
  if (ch == '"') {
    auto s = parse_basic_string(c);
    if (!s.ok()) return s.error();
    return Json(s.value());
  }
  if (ch == '[') return parse_array(c);
  std::string token;
  while (!c.eof()) {
    char t = c.peek();
    if (t == ',' || t == ']' || t == ' ' || t == '\t' || t == '#') break;
    token += t;
    ++c.pos;
  }
  if (token == "true") return Json(true);
  if (token == "false") return Json(false);
  if (token.empty()) return make_error(Errc::parse_error, "expected a value");
  try {
    if (token.find_first_of(".eE") == std::string::npos &&
        token.find_first_not_of("+-0123456789_") == std::string::npos) {
      std::string digits = replace_all(token, "_", "");
      std::size_t used = 0;
      long long v = std::stoll(digits, &used);
      if (used == digits.size()) return Json(v);
    }
    std::size_t used = 0;
    double d = std::stod(token, &used);
    if (used == token.size()) return Json(d);
  } catch (...) {
  }
  return make_error(Errc::parse_error, "cannot parse value '" + token + "'");
}

inline Json* descend(Json& root, const std::vector<std::string>& path) {
  Json* node = &root;
  for (const auto& seg : path) {
    if (!node->contains(seg)) (*node)[seg] = Json::object();
    node = &(*node)[seg];
    if (!node->is_object()) return nullptr;
  }
  return node;
}

inline std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (ch == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (ch == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

}  // namespace detail

inline Result<Json> parse_toml(const std::string& text) {
  Json root = Json::object();
  std::vector<std::string> table;
  std::size_t lineno = 0;

  for (auto& raw : split(text, '\n')) {
    ++lineno;
    std::string line(trim(detail::strip_comment(raw)));
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) {
      return Result<Json>(make_error(Errc::parse_error, "line " + std::to_string(lineno) + ": " + msg));
    };

    if (line.front() == '[') {
      if (line.back() != ']') return fail("unterminated table header");
      detail::Cursor c{std::string_view(line).substr(1, line.size() - 2), 0};
      table.clear();
      while (true) {
        auto seg = detail::parse_key_segment(c);
        if (!seg.ok()) return fail(seg.error().message);
        table.push_back(seg.value());
        detail::skip_ws(c);
        if (c.eof()) break;
        if (c.peek() != '.') return fail("expected '.' in table header");
        ++c.pos;
      }
      if (!detail::descend(root, table)) return fail("table path collides with a value");
      continue;
    }

    detail::Cursor c{line, 0};
    std::vector<std::string> key_path = table;
    while (true) {
      auto seg = detail::parse_key_segment(c);
      if (!seg.ok()) return fail(seg.error().message);
      key_path.push_back(seg.value());
      detail::skip_ws(c);
      if (!c.eof() && c.peek() == '.') {
        ++c.pos;
        continue;
      }
      break;
    }
    detail::skip_ws(c);
    if (c.eof() || c.peek() != '=') return fail("expected '=' after key");
    ++c.pos;
    auto value = detail::parse_value(c);
    if (!value.ok()) return fail(value.error().message);
    detail::skip_ws(c);
    if (!c.eof()) return fail("trailing characters after value");

    std::string leaf = key_path.back();
    key_path.pop_back();
    Json* node = detail::descend(root, key_path);
    if (!node) return fail("key path collides with a value");
    if (node->contains(leaf)) return fail("duplicate key '" + leaf + "'");
    (*node)[leaf] = value.value();
  }
  return root;
}

// ---------------------------------------------------------------------------
// JSON -> RunConfig

struct Overrides {
  std::optional<std::string> protocol;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> conditions;  // comma-separated
  std::optional<std::string> backend;     // "replay:<path>" or "wire"
  std::optional<std::string> output_dir;
};

namespace detail {

inline Status check_keys(const Json& obj, const std::string& where,
                         std::initializer_list<const char*> known) {
  if (!obj.is_object())
    return make_error(Errc::config_error, where + " must be a table/object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool found = false;
    for (const char* k : known)
      if (it.key() == k) { found = true; break; }
    if (!found)
      return make_error(Errc::config_error, "unknown field '" + it.key() + "' in " + where);
  }
  return ok_status();
}

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (base / path).lexically_normal().string();
}

inline Result<BackendConfig> parse_backend(const Json& j, const std::string& where,
                                           const std::filesystem::path& base) {
  if (auto st = check_keys(j, where,
                           {"kind", "endpoint", "model_name", "api_key_env", "replay_path",
                            "wire_format", "strict_replay", "retry_max_attempts",
                            "retry_base_backoff_ms"});
      !st.ok())
    return st.error();
  BackendConfig cfg;
  std::string kind = j.value("kind", "replay");
  if (kind == "replay") cfg.kind = BackendKind::replay;
  else if (kind == "wire") cfg.kind = BackendKind::wire;
  else return make_error(Errc::config_error, where + ".kind must be 'wire' or 'replay'");
  cfg.endpoint = j.value("endpoint", "");
  cfg.model_name = j.value("model_name", "");
  cfg.api_key_env = j.value("api_key_env", "");
  cfg.replay_path = resolve_path(base, j.value("replay_path", ""));
  std::string format = j.value("wire_format", "openai_chat");
  if (format == "openai_chat") cfg.wire_format = WireFormat::openai_chat;
  else if (format == "anthropic_messages") cfg.wire_format = WireFormat::anthropic_messages;
  else return make_error(Errc::config_error, where + ".wire_format unknown: " + format);
  cfg.strict_replay = j.value("strict_replay", false);
  cfg.retry.max_attempts = j.value("retry_max_attempts", 3);
  cfg.retry.base_backoff = std::chrono::milliseconds(j.value("retry_base_backoff_ms", 250));
  if (cfg.kind == BackendKind::replay && cfg.replay_path.empty())
    return make_error(Errc::config_error, where + ": replay kind requires replay_path");
  if (cfg.kind == BackendKind::wire && (cfg.endpoint.empty() || cfg.model_name.empty()))
    return make_error(Errc::config_error, where + ": wire kind requires endpoint and model_name");
  return cfg;
}

inline Result<std::string> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return make_error(Errc::config_error, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline Result<RunConfig> run_config_from_json(const Json& j,
                                              const std::filesystem::path& base_dir) {
  if (auto st = detail::check_keys(
          j, "config",
          {"protocol", "horizon", "conditions", "seeds", "benchmark", "output_dir",
           "anti_adjacent", "categories", "deterministic_clock", "agent", "judge",
           "price_table"});
      !st.ok())
    return st.error();

  RunConfig cfg;
  if (j.contains("protocol")) {
    auto p = harness::parse_protocol(j.at("protocol").get<std::string>());
    if (!p) return make_error(Errc::config_error, "protocol must be 'continual' or 'mixed'");
    cfg.protocol = *p;
  }
  cfg.horizon = j.value("horizon", cfg.protocol == Protocol::mixed ? 12 : 3);
  if (cfg.horizon <= 0) return make_error(Errc::config_error, "horizon must be positive");

  if (!j.contains("conditions") || !j.at("conditions").is_array() || j.at("conditions").empty())
    return make_error(Errc::config_error, "conditions must be a non-empty array");
  for (const auto& c : j.at("conditions")) {
    auto cond = agent::parse_condition(c.get<std::string>());
    if (!cond)
      return make_error(Errc::config_error,
                        "unknown condition '" + c.get<std::string>() + "' in conditions");
    cfg.conditions.push_back(*cond);
  }

  if (j.contains("seeds")) {
    cfg.seeds.clear();
    for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
    if (cfg.seeds.empty()) return make_error(Errc::config_error, "seeds must be non-empty");
  }

  cfg.benchmark_path = detail::resolve_path(base_dir, j.value("benchmark", ""));
  if (cfg.benchmark_path.empty())
    return make_error(Errc::config_error, "benchmark path is required");
  cfg.output_dir = detail::resolve_path(base_dir, j.value("output_dir", ""));
  cfg.anti_adjacent = j.value("anti_adjacent", true);
  if (j.contains("deterministic_clock"))
    cfg.deterministic_clock = j.at("deterministic_clock").get<bool>();
  for (const auto& c : j.value("categories", Json::array()))
    cfg.categories.push_back(c.get<std::string>());

  const Json& agent = j.value("agent", Json::object());
  if (auto st = detail::check_keys(agent, "agent",
                                   {"system_prompt", "system_prompt_file",
                                    "max_tool_iterations", "temperature", "max_output_tokens",
                                    "backend"});
      !st.ok())
    return st.error();
  cfg.agent.system_prompt = agent.value("system_prompt", "");
  if (agent.contains("system_prompt_file")) {
    auto text = detail::slurp(
        detail::resolve_path(base_dir, agent.at("system_prompt_file").get<std::string>()));
    if (!text.ok()) return text.error();
    cfg.agent.system_prompt = text.value();
  }
  cfg.agent.max_tool_iterations = agent.value("max_tool_iterations", 8);
  if (cfg.agent.max_tool_iterations < 1)
    return make_error(Errc::config_error, "agent.max_tool_iterations must be >= 1");
  cfg.agent.temperature = agent.value("temperature", 0.7);
  cfg.agent.max_output_tokens = agent.value("max_output_tokens", 4096);
  if (!agent.contains("backend"))
    return make_error(Errc::config_error, "agent.backend is required");
  auto agent_backend = detail::parse_backend(agent.at("backend"), "agent.backend", base_dir);
  if (!agent_backend.ok()) return agent_backend.error();
  cfg.agent.backend = agent_backend.value();

  const Json& judge = j.value("judge", Json::object());
  if (auto st = detail::check_keys(judge, "judge", {"kind", "backend"}); !st.ok())
    return st.error();
  std::string judge_kind = judge.value("kind", "oracle");
  if (judge_kind == "oracle") cfg.judge_kind = JudgeKind::oracle;
  else if (judge_kind == "llm") cfg.judge_kind = JudgeKind::llm;
  else return make_error(Errc::config_error, "judge.kind must be 'oracle' or 'llm'");
  if (cfg.judge_kind == JudgeKind::llm) {
    if (!judge.contains("backend"))
      return make_error(Errc::config_error, "judge.backend is required for an llm judge");
    auto jb = detail::parse_backend(judge.at("backend"), "judge.backend", base_dir);
    if (!jb.ok()) return jb.error();
    cfg.judge_backend = jb.value();
  }

  const Json prices = j.value("price_table", Json::object());
  for (auto it = prices.begin(); it != prices.end(); ++it) {
    if (auto st = detail::check_keys(it.value(), "price_table." + it.key(),
                                     {"input_per_mtok", "output_per_mtok"});
        !st.ok())
      return st.error();
    cfg.price_table[it.key()] = {it.value().value("input_per_mtok", 0.0),
                                 it.value().value("output_per_mtok", 0.0)};
  }
  return cfg;
}

inline Status apply_overrides(RunConfig& cfg, const Overrides& overrides) {
  if (overrides.protocol) {
    auto p = harness::parse_protocol(*overrides.protocol);
    if (!p) return make_error(Errc::config_error, "unknown protocol " + *overrides.protocol);
    cfg.protocol = *p;
  }
  if (overrides.seed) cfg.seeds = {*overrides.seed};
  if (overrides.conditions) {
    cfg.conditions.clear();
    for (auto& name : split(*overrides.conditions, ',')) {
      auto cond = agent::parse_condition(trim(name));
      if (!cond)
        return make_error(Errc::config_error,
                          "unknown condition '" + std::string(trim(name)) + "' in conditions");
      cfg.conditions.push_back(*cond);
    }
    if (cfg.conditions.empty())
      return make_error(Errc::config_error, "conditions override is empty");
  }
  if (overrides.backend) {
    const std::string& spec = *overrides.backend;
    if (spec.rfind("replay:", 0) == 0) {
      cfg.agent.backend.kind = BackendKind::replay;
      cfg.agent.backend.replay_path = spec.substr(7);
    } else if (spec == "wire") {
      cfg.agent.backend.kind = BackendKind::wire;
    } else {
      return make_error(Errc::config_error, "backend override must be 'wire' or 'replay:<path>'");
    }
  }
  if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
  return ok_status();
}

inline Result<RunConfig> load_run_config(const std::string& path,
                                         const Overrides& overrides = {}) {
  std::filesystem::path p(path);
  auto text = detail::slurp(p);
  if (!text.ok()) return text.error();

  Json j;
  if (p.extension() == ".json") {
    j = Json::parse(text.value(), nullptr, false);
    if (j.is_discarded()) return make_error(Errc::config_error, path + ": invalid JSON");
  } else {
    auto toml = parse_toml(text.value());
    if (!toml.ok())
      return make_error(Errc::config_error, path + ": " + toml.error().message);
    j = toml.value();
  }
  auto cfg = run_config_from_json(j, p.parent_path());
  if (!cfg.ok()) return cfg;
  RunConfig out = cfg.take();
  if (auto st = apply_overrides(out, overrides); !st.ok()) return st.error();
  return out;
}

}  // namespace feedmem::config
