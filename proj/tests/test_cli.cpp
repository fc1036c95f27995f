#include <doctest.h>

#include <cstdlib>

#include "feedmem/benchmark.hpp"
#include "feedmem/model_backend.hpp"
#include "test_support.hpp"

// End-to-end coverage of every CLI verb using only bundled fixtures.

using namespace feedmem;
using feedmem::testing::TempDir;

namespace {

const std::string kCli = FEEDMEM_CLI_PATH;
const std::string kData = FEEDMEM_DATA_DIR;

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  TempDir capture("feedmem-cli-io");
  auto out_path = capture.path() / "out.txt";
  auto err_path = capture.path() / "err.txt";
  std::string command =
      kCli + " " + args + " >" + out_path.string() + " 2>" + err_path.string();
  int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = feedmem::testing::read_text_file(out_path);
  result.err = feedmem::testing::read_text_file(err_path);
  return result;
}

}  // namespace

TEST_CASE("run verb: mixed replay run writes the report files") {
  TempDir dir;
  auto out = (dir.path() / "mixed").string();
  auto result = run_cli("run --config " + kData + "/configs/sample.toml --protocol mixed "
                        "--seed 7 --output-dir " + out);
  CAPTURE(result.err);
  REQUIRE(result.exit_code == 0);
  for (const char* name :
       {"records.jsonl", "report.json", "curves.csv", "pareto.csv", "pareto.svg"})
    CHECK(std::filesystem::exists(std::filesystem::path(out) / name));
}

TEST_CASE("run verb: missing config exits 2") {
  auto result = run_cli("run --config /nonexistent/run.toml");
  CHECK(result.exit_code == 2);
  CHECK(!result.err.empty());
}

TEST_CASE("run verb: unknown condition exits 2 and names the field") {
  TempDir dir;
  auto cfg = dir.path() / "bad.toml";
  feedmem::testing::write_text_file(
      cfg,
      "protocol = \"mixed\"\nconditions = [\"telepathy\"]\nbenchmark = \"" + kData +
          "/benchmark/manifest.json\"\n[agent.backend]\nkind = \"replay\"\nreplay_path = \"" +
          kData + "/fixtures/mixed.jsonl\"\n");
  auto result = run_cli("run --config " + cfg.string());
  CHECK(result.exit_code == 2);
  CHECK(result.err.find("telepathy") != std::string::npos);
  CHECK(result.err.find("conditions") != std::string::npos);
}

TEST_CASE("run verb: a failure inside the run exits 3") {
  TempDir dir;
  auto cfg = dir.path() / "noprices.toml";
  // Config parses cleanly but the price table misses the agent model, which
  // only surfaces once the run starts.
  feedmem::testing::write_text_file(
      cfg,
      "protocol = \"mixed\"\nconditions = [\"zero_shot\"]\nbenchmark = \"" + kData +
          "/benchmark/manifest.json\"\nseeds = [7]\n[agent.backend]\nkind = \"replay\"\n"
          "replay_path = \"" + kData + "/fixtures/mixed.jsonl\"\nmodel_name = \"scripted-v1\"\n"
          "[price_table.\"some-other-model\"]\ninput_per_mtok = 1.0\noutput_per_mtok = 1.0\n");
  auto result = run_cli("run --config " + cfg.string() + " --output-dir " +
                        (dir.path() / "out").string());
  CHECK(result.exit_code == 3);
  CHECK(result.err.find("price") != std::string::npos);
}

TEST_CASE("unknown verbs and flags are rejected with usage text") {
  auto verb = run_cli("frobnicate");
  CHECK(verb.exit_code != 0);
  auto flag = run_cli("run --config x.toml --no-such-flag 3");
  CHECK(flag.exit_code != 0);
  CHECK((flag.err + flag.out).find("--no-such-flag") != std::string::npos);
  CHECK((flag.err + flag.out).find("--help") != std::string::npos);
}

TEST_CASE("judge verb: oracle scores keyword coverage") {
  TempDir dir;
  // Two equal-weight checks; the response satisfies one of them.
  Json doc{{"categories",
            Json::array(
                {{{"category", "demo"},
                  {"rubrics",
                   Json::array({{{"rubric_id", "demo.r"},
                                 {"scale", "writing_0_10"},
                                 {"full_text", "demo rubric"},
                                 {"dimensions",
                                  Json::array({{{"name", "First"},
                                                {"weight", 0.5},
                                                {"checklist", Json::array({"emerald"})},
                                                {"levels", Json::array()}},
                                               {{"name", "Second"},
                                                {"weight", 0.5},
                                                {"checklist", Json::array({"obsidian"})},
                                                {"levels", Json::array()}}})}}})},
                  {"scenarios", Json::array({{{"scenario_id", "demo.001"},
                                              {"prompt", "p"},
                                              {"rubric_id", "demo.r"}}})}}})}};
  auto bench_path = dir.path() / "bench.json";
  feedmem::testing::write_text_file(bench_path, doc.dump());

  auto half_path = dir.path() / "half.txt";
  feedmem::testing::write_text_file(half_path, "a study in emerald only");
  auto half = run_cli("judge --benchmark " + bench_path.string() + " --rubric demo.r "
                      "--response " + half_path.string() + " --backend oracle");
  REQUIRE(half.exit_code == 0);
  Json half_json = Json::parse(half.out);
  CHECK(half_json.at("normalized") == 0.5);

  auto full_path = dir.path() / "full.txt";
  feedmem::testing::write_text_file(full_path, "emerald and obsidian together");
  auto full = run_cli("judge --benchmark " + bench_path.string() + " --rubric demo.r "
                      "--response " + full_path.string() + " --backend oracle");
  REQUIRE(full.exit_code == 0);
  CHECK(Json::parse(full.out).at("normalized") == 1.0);
}

TEST_CASE("judge verb: replay judge parses score tags") {
  TempDir dir;
  std::vector<RecordedExchange> events;
  GenerationRequest req;
  req.messages.push_back(ChatMessage::make_user("judge prompt"));
  GenerationResponse res;
  res.message = ChatMessage::make_assistant("<critique>fine work</critique><score>9.2</score>");
  res.usage = {10, 5, 1};
  events.push_back({req, res});
  auto fixture = dir.path() / "judge.jsonl";
  REQUIRE(record_transcript(events, fixture.string()).ok());

  auto response_path = dir.path() / "resp.txt";
  feedmem::testing::write_text_file(response_path, "text to grade");
  auto result = run_cli("judge --benchmark " + kData + "/benchmark/manifest.json "
                        "--rubric film_review.visual_v1 --response " + response_path.string() +
                        " --backend replay:" + fixture.string());
  CAPTURE(result.err);
  REQUIRE(result.exit_code == 0);
  Json out = Json::parse(result.out);
  CHECK(out.at("raw_score") == 9.2);
  CHECK(out.at("normalized") == doctest::Approx(0.92));
  CHECK(out.at("critique") == "fine work");
}

TEST_CASE("judge verb: malformed judge output exits 4 and echoes the text") {
  TempDir dir;
  std::vector<RecordedExchange> events;
  GenerationRequest req;
  req.messages.push_back(ChatMessage::make_user("judge prompt"));
  GenerationResponse res;
  res.message = ChatMessage::make_assistant("I simply refuse to use tags.");
  events.push_back({req, res});
  auto fixture = dir.path() / "bad_judge.jsonl";
  REQUIRE(record_transcript(events, fixture.string()).ok());

  auto response_path = dir.path() / "resp.txt";
  feedmem::testing::write_text_file(response_path, "text");
  auto result = run_cli("judge --benchmark " + kData + "/benchmark/manifest.json "
                        "--rubric film_review.visual_v1 --response " + response_path.string() +
                        " --backend replay:" + fixture.string());
  CHECK(result.exit_code == 4);
  CHECK(result.err.find("I simply refuse to use tags.") != std::string::npos);
}

TEST_CASE("inspect-memory verb: listing, content, and not-found") {
  TempDir dir;
  auto out = (dir.path() / "run").string();
  REQUIRE(run_cli("run --config " + kData + "/configs/sample.toml --output-dir " + out)
              .exit_code == 0);
  std::string root = out + "/roots/mixed_all_memory_feedback_s7";

  auto listing = run_cli("inspect-memory --root " + root);
  REQUIRE(listing.exit_code == 0);
  CHECK(listing.out.find("/memories/writing_principles.txt") != std::string::npos);
  // Sorted: assistant_persona files precede writing_principles.
  CHECK(listing.out.find("/memories/assistant_persona_casebook.txt") <
        listing.out.find("/memories/writing_principles.txt"));

  auto content = run_cli("inspect-memory --root " + root +
                         " --path /memories/writing_principles.txt");
  REQUIRE(content.exit_code == 0);
  CHECK(content.out.find("created_at: ") != std::string::npos);
  CHECK(content.out.find("modified_at: ") != std::string::npos);
  CHECK(content.out.find("WRITING PRINCIPLES") != std::string::npos);

  CHECK(run_cli("inspect-memory --root " + root + " --path /memories/none.txt").exit_code == 1);
  CHECK(run_cli("inspect-memory --root /nonexistent/root").exit_code == 1);
}

TEST_CASE("report verb: regenerates identical machine-readable output") {
  TempDir dir;
  auto out = (dir.path() / "run").string();
  REQUIRE(run_cli("run --config " + kData + "/configs/sample.toml --output-dir " + out)
              .exit_code == 0);

  auto regen = (dir.path() / "regen").string();
  auto result = run_cli("report --records " + out + "/records.jsonl --output-dir " + regen);
  REQUIRE(result.exit_code == 0);
  Json parsed = Json::parse(result.out, nullptr, false);
  REQUIRE(!parsed.is_discarded());
  CHECK(parsed.contains("conditions"));
  CHECK(feedmem::testing::read_text_file(std::filesystem::path(regen) / "report.json") ==
        feedmem::testing::read_text_file(std::filesystem::path(out) / "report.json"));
}

TEST_CASE("validate-data verb: accepts the bundled set and rejects broken data") {
  auto good = run_cli("validate-data --data " + kData + "/benchmark/manifest.json");
  REQUIRE(good.exit_code == 0);
  Json parsed = Json::parse(good.out);
  CHECK(parsed.at("valid") == true);
  CHECK(parsed.at("categories") == 5);

  TempDir dir;
  Json doc{{"categories",
            Json::array({{{"category", "x"},
                          {"rubrics",
                           Json::array({{{"rubric_id", "x.r"},
                                         {"scale", "writing_0_10"},
                                         {"full_text", "t"},
                                         {"dimensions",
                                          Json::array({{{"name", "A"},
                                                        {"weight", 0.9},
                                                        {"checklist", Json::array()},
                                                        {"levels", Json::array()}}})}}})},
                          {"scenarios", Json::array()}}})}};
  auto bad_path = dir.path() / "bad.json";
  feedmem::testing::write_text_file(bad_path, doc.dump());
  auto bad = run_cli("validate-data --data " + bad_path.string());
  CHECK(bad.exit_code == 2);
  CHECK(Json::parse(bad.out).at("valid") == false);
}

TEST_CASE("record-fixture verb: re-recording a replay reproduces the fixture byte-for-byte") {
  TempDir dir;
  auto out_fixture = dir.path() / "recaptured.jsonl";
  auto result = run_cli("record-fixture --config " + kData + "/configs/sample.toml "
                        "--output-dir " + (dir.path() / "run").string() +
                        " --out " + out_fixture.string());
  CAPTURE(result.err);
  REQUIRE(result.exit_code == 0);
  CHECK(feedmem::testing::read_text_file(out_fixture) ==
        feedmem::testing::read_text_file(std::filesystem::path(kData) / "fixtures/mixed.jsonl"));
}
