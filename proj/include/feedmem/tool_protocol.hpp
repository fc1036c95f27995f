#pragma once

// Tool schemas exposed to generation backends, plus the dispatcher that
// binds tool calls to the memory store and renders results back into
// conversation context.
//
// Dispatch is total: every call produces exactly one ToolResult, and all
// failures come back as error results the model can observe. The store is
// only mutated by a successful write_file or edit_file.

#include <optional>
#include <string>
#include <vector>

#include "feedmem/chat.hpp"
#include "feedmem/memory_store.hpp"

namespace feedmem::tools {

struct ToolResult {
  std::string call_id;
  bool ok = false;
  std::string payload;                // rendering on success, detail on error
  std::optional<Errc> error_kind;     // present iff !ok
};

// The four memory tools. Argument names are fixed; unknown extras are
// rejected so scripted transcripts stay unambiguous.
inline const std::vector<ToolSpec>& memory_tool_specs() {
  static const std::vector<ToolSpec> specs = {
      {"ls",
       "List memory files under a path prefix. Returns one line per file with "
       "its line count and last-modified time, or \"(empty)\".",
       {{"path", "string", true, "Path prefix to list, e.g. \"/memories/\""}}},
      {"read_file",
       "Read a memory file. Returns its full content.",
       {{"path", "string", true, "Path of the file to read"}}},
      {"write_file",
       "Create a memory file or fully replace an existing one.",
       {{"path", "string", true, "Path of the file to write"},
        {"content", "array[string]", true, "File content as a list of text lines"}}},
      {"edit_file",
       "Replace one exact occurrence of old_string in a memory file with "
       "new_string. Fails if old_string is absent or ambiguous.",
       {{"path", "string", true, "Path of the file to edit"},
        {"old_string", "string", true, "Exact text to replace (must occur once)"},
        {"new_string", "string", true, "Replacement text"}}},
  };
  return specs;
}

// Exported wire shape for the four memory tools.
inline Json tool_schema_json() { return tool_specs_schema(memory_tool_specs()); }

namespace detail {

inline ToolResult error_result(const ToolCall& call, Errc kind, std::string detail) {
  return ToolResult{call.call_id, false, std::move(detail), kind};
}

inline ToolResult ok_result(const ToolCall& call, std::string payload) {
  return ToolResult{call.call_id, true, std::move(payload), std::nullopt};
}

inline Result<std::string> string_arg(const Json& args, const std::string& name) {
  if (!args.contains(name))
    return make_error(Errc::bad_arguments, "missing argument: " + name);
  if (!args.at(name).is_string())
    return make_error(Errc::bad_arguments, "argument must be a string: " + name);
  return args.at(name).get<std::string>();
}

// content accepts a JSON array of strings or a single string (split on
// newlines); anything else is BadArguments.
inline Result<std::vector<std::string>> content_arg(const Json& args) {
  if (!args.contains("content"))
    return make_error(Errc::bad_arguments, "missing argument: content");
  const Json& v = args.at("content");
  if (v.is_string()) return memory::bytes_to_lines(v.get<std::string>());
  if (v.is_array()) {
    std::vector<std::string> lines;
    for (const auto& item : v) {
      if (!item.is_string())
        return make_error(Errc::bad_arguments, "content entries must be strings");
      lines.push_back(item.get<std::string>());
    }
    return lines;
  }
  return make_error(Errc::bad_arguments, "content must be an array of strings");
}

inline Status check_known_args(const Json& args, std::initializer_list<const char*> known) {
  if (!args.is_object())
    return make_error(Errc::bad_arguments, "arguments must be an object");
  for (auto it = args.begin(); it != args.end(); ++it) {
    bool found = false;
    for (const char* k : known)
      if (it.key() == k) { found = true; break; }
    if (!found) return make_error(Errc::bad_arguments, "unknown argument: " + it.key());
  }
  return ok_status();
}

inline std::string render_listing(const memory::FileListing& listing) {
  if (listing.entries.empty()) return "(empty)";
  std::vector<std::string> lines;
  lines.reserve(listing.entries.size());
  for (const auto& e : listing.entries) {
    lines.push_back(e.path + "  (" + std::to_string(e.line_count) +
                    (e.line_count == 1 ? " line" : " lines") + ", modified " +
                    e.modified_at + ")");
  }
  return join(lines, "\n");
}

}  // namespace detail

inline ToolResult dispatch(const ToolCall& call, const memory::MemoryRoot& root) {
  using namespace detail;
  const Json& args = call.arguments;

  if (call.tool_name == "ls") {
    if (auto st = check_known_args(args, {"path"}); !st.ok())
      return error_result(call, st.error().code, st.error().message);
    auto path = string_arg(args, "path");
    if (!path.ok()) return error_result(call, path.code(), path.error().message);
    auto listing = memory::list_files(root, path.value());
    if (!listing.ok()) return error_result(call, listing.code(), listing.error().message);
    return ok_result(call, render_listing(listing.value()));
  }

  if (call.tool_name == "read_file") {
    if (auto st = check_known_args(args, {"path"}); !st.ok())
      return error_result(call, st.error().code, st.error().message);
    auto path = string_arg(args, "path");
    if (!path.ok()) return error_result(call, path.code(), path.error().message);
    auto file = memory::read_file(root, path.value());
    if (!file.ok()) return error_result(call, file.code(), file.error().message);
    return ok_result(call, join(file.value().content, "\n"));
  }

  if (call.tool_name == "write_file") {
    if (auto st = check_known_args(args, {"path", "content"}); !st.ok())
      return error_result(call, st.error().code, st.error().message);
    auto path = string_arg(args, "path");
    if (!path.ok()) return error_result(call, path.code(), path.error().message);
    auto content = content_arg(args);
    if (!content.ok()) return error_result(call, content.code(), content.error().message);
    auto meta = memory::write_file(root, path.value(), content.value());
    if (!meta.ok()) return error_result(call, meta.code(), meta.error().message);
    return ok_result(call, "Wrote " + meta.value().path + " (" +
                               std::to_string(content.value().size()) +
                               (content.value().size() == 1 ? " line)" : " lines)"));
  }

  if (call.tool_name == "edit_file") {
    if (auto st = check_known_args(args, {"path", "old_string", "new_string"}); !st.ok())
      return error_result(call, st.error().code, st.error().message);
    auto path = string_arg(args, "path");
    if (!path.ok()) return error_result(call, path.code(), path.error().message);
    auto old_s = string_arg(args, "old_string");
    if (!old_s.ok()) return error_result(call, old_s.code(), old_s.error().message);
    auto new_s = string_arg(args, "new_string");
    if (!new_s.ok()) return error_result(call, new_s.code(), new_s.error().message);
    if (old_s.value().empty())
      return error_result(call, Errc::bad_arguments, "old_string must not be empty");
    auto meta = memory::edit_file(root, path.value(), old_s.value(), new_s.value());
    if (!meta.ok()) return error_result(call, meta.code(), meta.error().message);
    return ok_result(call, "Edited " + meta.value().path);
  }

  return error_result(call, Errc::unknown_tool, "no tool named '" + call.tool_name + "'");
}

// Pure function of the result; rendering is byte-stable so replays and
// transcripts reproduce exactly.
inline ChatMessage render_result(const ToolResult& result) {
  std::string text;
  if (result.ok) {
    text = result.payload;
  } else {
    text = "ERROR: ";
    text += errc_name(result.error_kind.value_or(Errc::bad_arguments));
    if (!result.payload.empty()) text += ": " + result.payload;
  }
  return ChatMessage::make_tool(result.call_id, std::move(text));
}

}  // namespace feedmem::tools
