#pragma once

// Sandboxed, persistent, human-readable file store for agent memory.
//
// Every path lives under the "/memories/" namespace and maps onto
// <root_dir>/memories/** on disk. Each file carries a sidecar under
// <root_dir>/.meta/ holding its two ISO 8601 timestamps, so the memory
// files themselves stay plain text that a person can open and edit.
//
// The store exposes exactly four operations: list_files, read_file,
// write_file and edit_file. There is no delete.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "feedmem/core.hpp"

namespace feedmem::memory {

namespace fs = std::filesystem;

struct MemoryRoot {
  fs::path root_dir;       // sandbox anchor; nothing is touched outside it
  std::string run_id;      // label isolating concurrent experiments
  Clock clock = system_now;
};

struct MemoryFile {
  std::string path;                   // normalized "/memories/..." form
  std::vector<std::string> content;   // ordered text lines
  std::string created_at;             // ISO 8601 UTC, immutable after first write
  std::string modified_at;            // ISO 8601 UTC, non-decreasing
};

struct FileMeta {
  std::string path;
  std::string created_at;
  std::string modified_at;
};

struct ListingEntry {
  std::string path;
  std::size_t line_count = 0;
  std::string modified_at;
};

struct FileListing {
  std::vector<ListingEntry> entries;  // sorted lexicographically by path
};

// ---------------------------------------------------------------------------
// Path normalization.
//
// Accepted spellings: "/memories/x", "./memories/x", "memories/x". The
// agent-facing system prompt talks about "./memories/", so both spellings
// must land in the same namespace. "." segments and duplicate slashes
// collapse; ".." is resolved logically and may never climb above the
// namespace root.

inline Result<std::string> normalize_memory_path(std::string_view raw) {
  if (raw.empty()) return make_error(Errc::invalid_path, "empty path");
  for (unsigned char c : raw) {
    if (c < 0x20 || c == 0x7f)
      return make_error(Errc::invalid_path, "control character in path");
    if (c == '\\')
      return make_error(Errc::invalid_path, "backslash in path");
  }
  std::vector<std::string> stack;
  for (auto& seg : split(raw, '/')) {
    if (seg.empty() || seg == ".") continue;
    if (seg == "..") {
      if (stack.empty())
        return make_error(Errc::path_escape, "path climbs above the sandbox root");
      stack.pop_back();
      continue;
    }
    stack.push_back(seg);
  }
  if (stack.empty() || stack.front() != "memories")
    return make_error(Errc::path_escape,
                      "path must stay under /memories/: " + std::string(raw));
  return "/" + join(stack, "/");
}

// ---------------------------------------------------------------------------
// Line codec. A file stores its lines joined with '\n' plus one trailing
// newline; an empty line list is an empty file. This round-trips exactly.

inline std::string lines_to_bytes(const std::vector<std::string>& lines) {
  if (lines.empty()) return {};
  return join(lines, "\n") + "\n";
}

inline std::vector<std::string> bytes_to_lines(std::string_view bytes) {
  if (bytes.empty()) return {};
  if (bytes.back() == '\n') bytes.remove_suffix(1);
  return split(bytes, '\n');
}

// Tool arguments may carry embedded newlines inside individual "lines";
// they are split apart here so the stored form stays canonical.
inline std::vector<std::string> sanitize_lines(const std::vector<std::string>& input) {
  std::vector<std::string> out;
  for (const auto& line : input) {
    for (auto& piece : split(line, '\n')) out.push_back(std::move(piece));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace detail {

inline fs::path content_path(const MemoryRoot& root, const std::string& norm) {
  return root.root_dir / norm.substr(1);  // "/memories/x" -> root/memories/x
}

inline fs::path meta_path(const MemoryRoot& root, const std::string& norm) {
  return root.root_dir / ".meta" / (norm.substr(1) + ".meta");
}

inline Result<std::string> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return make_error(Errc::io_error, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Status spew(const fs::path& p, std::string_view bytes) {
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) return make_error(Errc::io_error, "mkdir failed: " + p.parent_path().string());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) return make_error(Errc::io_error, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  return out.good() ? ok_status() : Status(make_error(Errc::io_error, "short write"));
}

struct Meta {
  std::string created_at;
  std::string modified_at;
};

inline Result<Meta> load_meta(const MemoryRoot& root, const std::string& norm) {
  auto r = slurp(meta_path(root, norm));
  if (!r.ok()) return r.error();
  Meta m;
  for (auto& line : bytes_to_lines(r.value())) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq);
    auto val = line.substr(eq + 1);
    if (key == "created_at") m.created_at = val;
    else if (key == "modified_at") m.modified_at = val;
  }
  if (m.created_at.empty() || m.modified_at.empty())
    return make_error(Errc::io_error, "corrupt sidecar for " + norm);
  return m;
}

inline Status store_meta(const MemoryRoot& root, const std::string& norm, const Meta& m) {
  return spew(meta_path(root, norm),
              "created_at=" + m.created_at + "\nmodified_at=" + m.modified_at + "\n");
}

// Files dropped into the tree by hand (the store is meant to be curated)
// get a sidecar on first observation.
inline Result<Meta> meta_or_heal(const MemoryRoot& root, const std::string& norm) {
  if (fs::exists(meta_path(root, norm))) return load_meta(root, norm);
  Meta m;
  m.created_at = m.modified_at = format_iso8601(root.clock());
  if (auto st = store_meta(root, norm, m); !st.ok()) return st.error();
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// The four operations.

inline Result<FileListing> list_files(const MemoryRoot& root, const std::string& prefix) {
  auto norm = normalize_memory_path(prefix);
  if (!norm.ok()) return norm.error();

  FileListing listing;
  fs::path base = root.root_dir / "memories";
  std::error_code ec;
  if (!fs::exists(base, ec)) return listing;

  for (fs::recursive_directory_iterator it(base, ec), end; !ec && it != end; it.increment(ec)) {
    if (!it->is_regular_file(ec)) continue;
    auto rel = fs::relative(it->path(), root.root_dir, ec).generic_string();
    if (ec) continue;
    std::string sandbox_path = "/" + rel;
    if (sandbox_path.rfind(norm.value(), 0) != 0) continue;

    auto bytes = detail::slurp(it->path());
    if (!bytes.ok()) return bytes.error();
    auto meta = detail::meta_or_heal(root, sandbox_path);
    if (!meta.ok()) return meta.error();
    listing.entries.push_back({sandbox_path, bytes_to_lines(bytes.value()).size(),
                               meta.value().modified_at});
  }
  std::sort(listing.entries.begin(), listing.entries.end(),
            [](const ListingEntry& a, const ListingEntry& b) { return a.path < b.path; });
  return listing;
}

inline Result<MemoryFile> read_file(const MemoryRoot& root, const std::string& path) {
  auto norm = normalize_memory_path(path);
  if (!norm.ok()) return norm.error();
  if (norm.value() == "/memories")
    return make_error(Errc::invalid_path, "missing filename");

  auto file = detail::content_path(root, norm.value());
  std::error_code ec;
  if (!fs::is_regular_file(file, ec))
    return make_error(Errc::not_found, "no memory file at " + norm.value());

  auto bytes = detail::slurp(file);
  if (!bytes.ok()) return bytes.error();
  auto meta = detail::meta_or_heal(root, norm.value());
  if (!meta.ok()) return meta.error();
  return MemoryFile{norm.value(), bytes_to_lines(bytes.value()),
                    meta.value().created_at, meta.value().modified_at};
}

inline Result<FileMeta> write_file(const MemoryRoot& root, const std::string& path,
                                   const std::vector<std::string>& content) {
  auto norm = normalize_memory_path(path);
  if (!norm.ok()) return norm.error();
  if (norm.value() == "/memories")
    return make_error(Errc::invalid_path, "missing filename");

  auto file = detail::content_path(root, norm.value());
  std::error_code ec;
  if (fs::is_directory(file, ec))
    return make_error(Errc::invalid_path, norm.value() + " is a directory");

  bool existed = fs::is_regular_file(file, ec);
  detail::Meta meta;
  std::string now = format_iso8601(root.clock());
  if (existed) {
    auto prev = detail::meta_or_heal(root, norm.value());
    if (!prev.ok()) return prev.error();
    meta.created_at = prev.value().created_at;
    meta.modified_at = std::max(prev.value().modified_at, now);
  } else {
    meta.created_at = meta.modified_at = now;
  }

  if (auto st = detail::spew(file, lines_to_bytes(sanitize_lines(content))); !st.ok())
    return st.error();
  if (auto st = detail::store_meta(root, norm.value(), meta); !st.ok()) return st.error();
  return FileMeta{norm.value(), meta.created_at, meta.modified_at};
}

inline Result<FileMeta> edit_file(const MemoryRoot& root, const std::string& path,
                                  const std::string& old_text, const std::string& new_text) {
  auto current = read_file(root, path);
  if (!current.ok()) return current.error();

  std::string joined = join(current.value().content, "\n");
  auto n = count_occurrences(joined, old_text);
  if (n == 0)
    return make_error(Errc::no_match, "old_text not present in " + current.value().path);
  if (n > 1)
    return make_error(Errc::ambiguous_match,
                      "old_text occurs more than once in " + current.value().path);

  std::string edited = replace_first(std::move(joined), old_text, new_text);
  std::vector<std::string> lines = edited.empty() ? std::vector<std::string>{} : split(edited, '\n');

  const std::string& norm = current.value().path;
  detail::Meta meta;
  meta.created_at = current.value().created_at;
  meta.modified_at = std::max(current.value().modified_at, format_iso8601(root.clock()));

  if (auto st = detail::spew(detail::content_path(root, norm), lines_to_bytes(lines)); !st.ok())
    return st.error();
  if (auto st = detail::store_meta(root, norm, meta); !st.ok()) return st.error();
  return FileMeta{norm, meta.created_at, meta.modified_at};
}

}  // namespace feedmem::memory
