#include <doctest.h>

#include "feedmem/memory_store.hpp"
#include "test_support.hpp"

using namespace feedmem;
using namespace feedmem::memory;
using feedmem::testing::TempDir;

TEST_CASE("empty store lists zero entries") {
  TempDir dir;
  auto root = testing::make_root(dir.path());
  auto listing = list_files(root, "/memories/");
  REQUIRE(listing.ok());
  CHECK(listing.value().entries.empty());
}

TEST_CASE("single write round trip") {
  TempDir dir;
  auto root = testing::make_root(dir.path());
  auto meta = write_file(root, "/memories/a.txt", {"x"});
  REQUIRE(meta.ok());
  CHECK(meta.value().created_at == meta.value().modified_at);

  auto listing = list_files(root, "/memories/");
  REQUIRE(listing.ok());
  REQUIRE(listing.value().entries.size() == 1);
  CHECK(listing.value().entries[0].path == "/memories/a.txt");
  CHECK(listing.value().entries[0].line_count == 1);

  auto file = read_file(root, "/memories/a.txt");
  REQUIRE(file.ok());
  CHECK(file.value().content == std::vector<std::string>{"x"});
}

TEST_CASE("read of never-written path is NotFound") {
  TempDir dir;
  auto root = testing::make_root(dir.path());
  auto file = read_file(root, "/memories/ghost.txt");
  REQUIRE(!file.ok());
  CHECK(file.code() == Errc::not_found);
}

TEST_CASE("path escape is rejected and nothing leaks outside the root") {
  TempDir dir;
  auto sandbox = dir.path() / "sandbox";
  std::filesystem::create_directories(sandbox);
  auto root = testing::make_root(sandbox);

  auto meta = write_file(root, "../../etc/x", {"boom"});
  REQUIRE(!meta.ok());
  CHECK(meta.code() == Errc::path_escape);

  // The only thing in the temp dir is the (still empty) sandbox.
  std::size_t outside = 0;
  for (auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
    (void)entry;
    ++outside;
  }
  CHECK(outside == 1);
}

TEST_CASE("overwrite preserves created_at and advances modified_at") {
  TempDir dir;
  auto root = testing::make_root(dir.path());
  auto first = write_file(root, "/memories/a.txt", {"v1"});
  REQUIRE(first.ok());
  auto second = write_file(root, "/memories/a.txt", {"v2", "more"});
  REQUIRE(second.ok());
  CHECK(second.value().created_at == first.value().created_at);
  CHECK(second.value().modified_at > first.value().modified_at);

  auto file = read_file(root, "/memories/a.txt");
  REQUIRE(file.ok());
  CHECK(file.value().content == std::vector<std::string>{"v2", "more"});
}

TEST_CASE("edit replaces a unique occurrence") {
  TempDir dir;
  auto root = testing::make_root(dir.path());
  REQUIRE(write_file(root, "/memories/a.txt", {"a b c"}).ok());
  auto meta = edit_file(root, "/memories/a.txt", "b", "B");
  REQUIRE(meta.ok());
  auto file = read_file(root, "/memories/a.txt");
  REQUIRE(file.ok());
  CHECK(join(file.value().content, "\n") == "a B c");
}

TEST_CASE("edit keeps created_at, advances modified_at") {
  TempDir dir;
  auto root = testing::make_root(dir.path());
  auto created = write_file(root, "/memories/a.txt", {"x"});
  REQUIRE(created.ok());
  auto edited = edit_file(root, "/memories/a.txt", "x", "y");
  REQUIRE(edited.ok());
  CHECK(edited.value().created_at == created.value().created_at);
  CHECK(edited.value().modified_at > created.value().modified_at);
  auto file = read_file(root, "/memories/a.txt");
  REQUIRE(file.ok());
  CHECK(file.value().content == std::vector<std::string>{"y"});
}

TEST_CASE("edit errors: NotFound, NoMatch, AmbiguousMatch") {
  TempDir dir;
  auto root = testing::make_root(dir.path());
  CHECK(edit_file(root, "/memories/nope.txt", "a", "b").code() == Errc::not_found);

  REQUIRE(write_file(root, "/memories/a.txt", {"hello"}).ok());
  CHECK(edit_file(root, "/memories/a.txt", "absent", "b").code() == Errc::no_match);

  REQUIRE(write_file(root, "/memories/dup.txt", {"same line", "same line"}).ok());
  CHECK(edit_file(root, "/memories/dup.txt", "same line", "other").code() ==
        Errc::ambiguous_match);
}

TEST_CASE("path normalization accepts the prompt spellings") {
  CHECK(normalize_memory_path("/memories/a.txt").value() == "/memories/a.txt");
  CHECK(normalize_memory_path("./memories/a.txt").value() == "/memories/a.txt");
  CHECK(normalize_memory_path("memories/a.txt").value() == "/memories/a.txt");
  CHECK(normalize_memory_path("/memories//x/./y.txt").value() == "/memories/x/y.txt");
  CHECK(normalize_memory_path("/memories/x/../y.txt").value() == "/memories/y.txt");

  CHECK(normalize_memory_path("notes.txt").code() == Errc::path_escape);
  CHECK(normalize_memory_path("/etc/passwd").code() == Errc::path_escape);
  CHECK(normalize_memory_path("/memories/../../x").code() == Errc::path_escape);
  CHECK(normalize_memory_path("").code() == Errc::invalid_path);
  CHECK(normalize_memory_path("/memories/bad\x01name").code() == Errc::invalid_path);
  CHECK(normalize_memory_path("/memories\\evil").code() == Errc::invalid_path);
}

TEST_CASE("writing the namespace root itself is invalid") {
  TempDir dir;
  auto root = testing::make_root(dir.path());
  CHECK(write_file(root, "/memories/", {"x"}).code() == Errc::invalid_path);
  CHECK(read_file(root, "/memories").code() == Errc::invalid_path);
}

TEST_CASE("persistence: a fresh root over the same directory sees identical state") {
  TempDir dir;
  {
    auto root = testing::make_root(dir.path());
    REQUIRE(write_file(root, "/memories/one.txt", {"alpha", "beta"}).ok());
    REQUIRE(write_file(root, "/memories/sub/two.txt", {"gamma"}).ok());
    REQUIRE(edit_file(root, "/memories/one.txt", "beta", "BETA").ok());
  }
  auto before = testing::store_digest(testing::make_root(dir.path()));
  auto after = testing::store_digest(testing::make_root(dir.path()));
  CHECK(before == after);
  CHECK(before.rfind("error:", 0) != 0);

  auto root = testing::make_root(dir.path());
  auto file = read_file(root, "/memories/one.txt");
  REQUIRE(file.ok());
  CHECK(file.value().content == std::vector<std::string>{"alpha", "BETA"});
}

TEST_CASE("line codec round-trips exactly") {
  std::vector<std::vector<std::string>> cases = {
      {}, {""}, {"a"}, {"a", ""}, {"", ""}, {"a", "b", "c"}, {"trailing space "},
  };
  for (const auto& lines : cases) {
    CHECK(bytes_to_lines(lines_to_bytes(lines)) == lines);
  }
  // Embedded newlines are split at write time.
  CHECK(sanitize_lines({"a\nb", "c"}) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("modified_at is non-decreasing even if the clock regresses") {
  TempDir dir;
  // A clock that jumps backwards after the first call.
  auto t0 = *parse_iso8601("2026-06-01T00:00:00Z");
  auto calls = std::make_shared<int>(0);
  Clock clock = [t0, calls]() {
    int n = (*calls)++;
    return n == 0 ? t0 : t0 - std::chrono::hours(24);
  };
  memory::MemoryRoot root{dir.path(), "regress", clock};
  auto first = write_file(root, "/memories/a.txt", {"x"});
  REQUIRE(first.ok());
  auto second = write_file(root, "/memories/a.txt", {"y"});
  REQUIRE(second.ok());
  CHECK(second.value().modified_at >= first.value().modified_at);
}

TEST_CASE("listing is sorted and prefix-filtered") {
  TempDir dir;
  auto root = testing::make_root(dir.path());
  REQUIRE(write_file(root, "/memories/z.txt", {"z"}).ok());
  REQUIRE(write_file(root, "/memories/a.txt", {"a"}).ok());
  REQUIRE(write_file(root, "/memories/sub/m.txt", {"m"}).ok());

  auto all = list_files(root, "/memories/");
  REQUIRE(all.ok());
  REQUIRE(all.value().entries.size() == 3);
  CHECK(all.value().entries[0].path == "/memories/a.txt");
  CHECK(all.value().entries[1].path == "/memories/sub/m.txt");
  CHECK(all.value().entries[2].path == "/memories/z.txt");

  auto sub = list_files(root, "/memories/sub");
  REQUIRE(sub.ok());
  REQUIRE(sub.value().entries.size() == 1);
  CHECK(sub.value().entries[0].path == "/memories/sub/m.txt");
}
