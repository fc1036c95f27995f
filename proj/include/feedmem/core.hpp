#pragma once

// Shared vocabulary for the library: error codes, a small Result<T>,
// injectable clocks, ISO 8601 helpers and string utilities.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace feedmem {

enum class Errc {
  path_escape,
  not_found,
  no_match,
  ambiguous_match,
  invalid_path,
  unknown_tool,
  bad_arguments,
  transport_error,
  replay_exhausted,
  replay_mismatch,
  parse_error,
  schema_error,
  insufficient_scenarios,
  missing_score,
  non_numeric_score,
  missing_price,
  empty_input,
  tool_loop_exceeded,
  io_error,
  config_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::path_escape: return "PathEscape";
    case Errc::not_found: return "NotFound";
    case Errc::no_match: return "NoMatch";
    case Errc::ambiguous_match: return "AmbiguousMatch";
    case Errc::invalid_path: return "InvalidPath";
    case Errc::unknown_tool: return "UnknownTool";
    case Errc::bad_arguments: return "BadArguments";
    case Errc::transport_error: return "TransportError";
    case Errc::replay_exhausted: return "ReplayExhausted";
    case Errc::replay_mismatch: return "ReplayMismatch";
    case Errc::parse_error: return "ParseError";
    case Errc::schema_error: return "SchemaError";
    case Errc::insufficient_scenarios: return "InsufficientScenarios";
    case Errc::missing_score: return "MissingScore";
    case Errc::non_numeric_score: return "NonNumericScore";
    case Errc::missing_price: return "MissingPrice";
    case Errc::empty_input: return "EmptyInput";
    case Errc::tool_loop_exceeded: return "ToolLoopExceeded";
    case Errc::io_error: return "IoError";
    case Errc::config_error: return "ConfigError";
  }
  return "UnknownError";
}

struct Error {
  Errc code;
  std::string message;

  std::string to_string() const {
    return message.empty() ? std::string(errc_name(code))
                           : std::string(errc_name(code)) + ": " + message;
  }
};

inline Error make_error(Errc code, std::string message = {}) {
  return Error{code, std::move(message)};
}

// Minimal expected-like holder. All fallible library operations return one
// of these instead of throwing.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : repr_(std::move(value)) {}
  Result(Error error) : repr_(std::move(error)) {}

  bool ok() const { return std::holds_alternative<T>(repr_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& { return std::get<T>(repr_); }
  T& value() & { return std::get<T>(repr_); }
  T&& take() { return std::move(std::get<T>(repr_)); }

  const Error& error() const { return std::get<Error>(repr_); }
  Errc code() const { return error().code; }

 private:
  std::variant<T, Error> repr_;
};

struct Unit {};
using Status = Result<Unit>;
inline Status ok_status() { return Status(Unit{}); }

// ---------------------------------------------------------------------------
// Clocks

using TimePoint = std::chrono::system_clock::time_point;
using Clock = std::function<TimePoint()>;

inline TimePoint system_now() { return std::chrono::system_clock::now(); }

// Clock that starts at a fixed instant and advances by `step` per call.
// Used wherever a run has to be byte-reproducible.
inline Clock make_fixed_step_clock(TimePoint start,
                                   std::chrono::seconds step = std::chrono::seconds(1)) {
  auto next = std::make_shared<TimePoint>(start);
  return [next, step]() {
    TimePoint t = *next;
    *next += step;
    return t;
  };
}

inline std::string format_iso8601(TimePoint tp) {
  using namespace std::chrono;
  auto day_point = floor<days>(tp);
  year_month_day ymd{day_point};
  hh_mm_ss hms{floor<seconds>(tp) - day_point};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ",
                int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                static_cast<long long>(hms.hours().count()),
                static_cast<long long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()));
  return buf;
}

inline std::optional<TimePoint> parse_iso8601(const std::string& text) {
  using namespace std::chrono;
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (std::sscanf(text.c_str(), "%4d-%2u-%2uT%2u:%2u:%2uZ", &y, &mo, &d, &h, &mi, &s) != 6)
    return std::nullopt;
  year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

// ---------------------------------------------------------------------------
// String helpers

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Counts occurrences allowing overlap, so "aa" occurs twice in "aaa".
// An empty needle is reported as ambiguous (count 2).
inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 2;
  std::size_t count = 0, pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
    ++count;
    ++pos;
    if (count > 1) break;  // callers only distinguish 0 / 1 / many
  }
  return count;
}

inline std::string replace_first(std::string text, std::string_view needle,
                                 std::string_view replacement) {
  auto pos = text.find(needle);
  if (pos != std::string::npos) text.replace(pos, needle.size(), replacement);
  return text;
}

inline std::string replace_all(std::string text, std::string_view needle,
                               std::string_view replacement) {
  if (needle.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), replacement);
    pos += replacement.size();
  }
  return text;
}

// Shortest round-trip decimal rendering (deterministic across runs).
inline std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// Hashing (FNV-1a, 64-bit) for replay request fingerprints and digests.

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace feedmem
