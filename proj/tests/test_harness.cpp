#include <doctest.h>

#include <thread>

#include "feedmem/config.hpp"
#include "feedmem/harness.hpp"
#include "test_support.hpp"

using namespace feedmem;
using namespace feedmem::harness;
using feedmem::testing::TempDir;

namespace {

const std::string kContinualToml = std::string(FEEDMEM_DATA_DIR) + "/configs/continual.toml";
const std::string kSampleToml = std::string(FEEDMEM_DATA_DIR) + "/configs/sample.toml";

RunResult run_from_config(const std::string& config_path, const std::string& out_dir) {
  config::Overrides o;
  o.output_dir = out_dir;
  auto cfg = config::load_run_config(config_path, o);
  REQUIRE(cfg.ok());
  auto loaded = bench::load_benchmark(cfg.value().benchmark_path);
  REQUIRE(loaded.ok());
  auto backend = make_backend(cfg.value().agent.backend);
  REQUIRE(backend.ok());
  std::vector<std::unique_ptr<Backend>> keep;
  auto judge = make_judge(cfg.value().judge_kind, cfg.value().judge_backend, keep);
  REQUIRE(judge.ok());
  auto result = run_protocol(cfg.value(), loaded.value().set, *backend.value(), *judge.value());
  REQUIRE(result.ok());
  return result.take();
}

}  // namespace

TEST_CASE("aggregate: documented examples") {
  auto single = aggregate({0.5});
  REQUIRE(single.ok());
  CHECK(single.value().mean == doctest::Approx(0.5));
  CHECK(single.value().stddev == 0.0);

  auto pair = aggregate({0.0, 1.0});
  REQUIRE(pair.ok());
  CHECK(pair.value().mean == doctest::Approx(0.5));
  CHECK(pair.value().stddev == doctest::Approx(0.7071067811865476).epsilon(1e-9));

  auto triple = aggregate({0.78, 0.78, 0.78});
  REQUIRE(triple.ok());
  CHECK(triple.value().mean == doctest::Approx(0.78));
  CHECK(triple.value().stddev == doctest::Approx(0.0));

  auto empty = aggregate({});
  REQUIRE(!empty.ok());
  CHECK(empty.code() == Errc::empty_input);
}

TEST_CASE("cost accounting: usage times rates") {
  PriceEntry price{3.0, 15.0};
  UsageStats usage{1'000'000, 200'000, 3};
  CHECK(usage_cost(usage, price) == doctest::Approx(3.0 + 3.0));
  CHECK(usage_cost(UsageStats{}, price) == doctest::Approx(0.0));

  std::map<std::string, PriceEntry> table{{"m", price}};
  CHECK(price_for(table, "m").ok());
  CHECK(price_for(table, "other").code() == Errc::missing_price);
}

TEST_CASE("pareto flags exactly the non-dominated conditions") {
  auto mk = [](const std::string& cond, double cost, double score) {
    EpisodeRecord r;
    r.condition = cond;
    r.cost_usd = cost;
    r.cost_answer_only_usd = cost;
    r.has_verdict = true;
    r.normalized = score;
    r.protocol = "continual";
    r.step_index = 1;
    return r;
  };
  // A strictly dominates B; C trades off.
  auto points = cost_report({mk("a", 0.1, 0.9), mk("b", 0.5, 0.5), mk("c", 0.05, 0.3)});
  REQUIRE(points.size() == 3);
  for (const auto& p : points) {
    if (p.condition == "a") CHECK(p.pareto);
    if (p.condition == "b") CHECK(!p.pareto);
    if (p.condition == "c") CHECK(p.pareto);
  }

  auto solo = cost_report({mk("only", 1.0, 0.1)});
  REQUIRE(solo.size() == 1);
  CHECK(solo[0].pareto);
}

TEST_CASE("episode records round-trip through JSONL") {
  TempDir dir;
  EpisodeRecord r;
  r.run_id = "cell";
  r.protocol = "mixed";
  r.condition = "memory_feedback";
  r.step_index = 3;
  r.seed = 7;
  r.scenario_id = "s";
  r.category = "c";
  r.final_text = "text with\nnewlines";
  r.has_verdict = true;
  r.critique = "crit";
  r.raw_score = 7.5;
  r.normalized = 0.75;
  r.usage_agent_answer = {100, 20, 2};
  r.usage_agent_feedback = {50, 10, 1};
  r.usage_judge = {5, 1, 1};
  r.generation_calls_answer = 2;
  r.generation_calls_feedback = 1;
  r.tool_iterations_answer = 1;
  r.retrieved = true;
  r.agent_model = "m";
  r.judge_name = "oracle";
  r.cost_usd = 0.001;
  r.cost_answer_only_usd = 0.0005;
  r.memory_file_count_after = 4;

  auto path = dir.path() / "records.jsonl";
  REQUIRE(write_records_jsonl({r}, path).ok());
  auto loaded = load_records_jsonl(path.string());
  REQUIRE(loaded.ok());
  REQUIRE(loaded.value().size() == 1);
  CHECK(loaded.value()[0].to_json().dump() == r.to_json().dump());
}

TEST_CASE("empty conditions produce an empty run") {
  TempDir dir;
  auto cfg = config::load_run_config(kContinualToml);
  REQUIRE(cfg.ok());
  RunConfig rc = cfg.value();
  rc.conditions.clear();
  rc.output_dir = (dir.path() / "out").string();
  auto loaded = bench::load_benchmark(rc.benchmark_path);
  REQUIRE(loaded.ok());
  auto backend = make_backend(rc.agent.backend);
  REQUIRE(backend.ok());
  eval::OracleJudge judge;
  auto result = run_protocol(rc, loaded.value().set, *backend.value(), judge);
  REQUIRE(result.ok());
  CHECK(result.value().records.empty());
  CHECK(result.value().report.at("episodes") == 0);
}

TEST_CASE("continual fixture run: per-category learning properties") {
  TempDir dir;
  auto result = run_from_config(kContinualToml, (dir.path() / "out").string());
  CHECK(result.records.size() == 45);  // 5 categories x 3 conditions x 3 steps

  // Index normalized score by (category, condition, step).
  std::map<std::string, std::map<std::string, std::map<int, double>>> score;
  for (const auto& r : result.records) {
    REQUIRE(!r.failed);
    score[r.category][r.condition][r.step_index] = r.normalized;
  }
  REQUIRE(score.size() == 5);
  for (auto& [category, by_condition] : score) {
    CAPTURE(category);
    auto& memory = by_condition["memory_feedback"];
    CHECK(memory[1] < memory[2]);
    CHECK(memory[2] < memory[3]);
    // Zero-shot is exactly flat under the oracle judge.
    auto& zero = by_condition["zero_shot"];
    CHECK(zero[1] == zero[2]);
    CHECK(zero[2] == zero[3]);
    // Step-3 memory matches or beats the static self-critique pipeline.
    CHECK(memory[3] >= by_condition["self_critique"][3]);
  }
}

TEST_CASE("continual fixture run: accounting closure and call counts") {
  TempDir dir;
  auto result = run_from_config(kContinualToml, (dir.path() / "out").string());

  UsageStats agent_sum, judge_sum;
  double cost_sum = 0.0;
  for (const auto& r : result.records) {
    agent_sum += r.usage_agent_answer;
    agent_sum += r.usage_agent_feedback;
    judge_sum += r.usage_judge;
    cost_sum += r.cost_usd;
    if (r.condition == "self_critique") {
      CHECK(r.generation_calls_answer == 3);
      CHECK(r.generation_calls_feedback == 0);
    }
    if (r.condition == "zero_shot") CHECK(r.generation_calls_feedback == 0);
    if (r.condition == "memory_feedback")
      CHECK(r.generation_calls_answer == 1 + r.tool_iterations_answer);
  }

  // Report totals equal record sums exactly (token counts are integers,
  // the global cost is accumulated in record order).
  const Json& totals = result.report.at("totals");
  UsageStats report_agent = usage_from_json(totals.at("agent"));
  UsageStats report_judge = usage_from_json(totals.at("judge"));
  CHECK(report_agent.input_tokens == agent_sum.input_tokens);
  CHECK(report_agent.output_tokens == agent_sum.output_tokens);
  CHECK(report_agent.calls == agent_sum.calls);
  CHECK(report_judge.calls == judge_sum.calls);
  CHECK(totals.at("cost_usd").get<double>() == cost_sum);

  // cost_usd = usage x price_table rates (3 in / 15 out per MTok).
  for (const auto& r : result.records) {
    double expected =
        (static_cast<double>(r.usage_agent_answer.input_tokens +
                             r.usage_agent_feedback.input_tokens) * 3.0 +
         static_cast<double>(r.usage_agent_answer.output_tokens +
                             r.usage_agent_feedback.output_tokens) * 15.0) / 1e6;
    CHECK(r.cost_usd == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("the rubric text never appears in tool-condition transcripts") {
  TempDir dir;
  auto out = dir.path() / "out";
  run_from_config(kContinualToml, out.string());
  auto loaded = bench::load_benchmark(std::string(FEEDMEM_DATA_DIR) + "/benchmark/manifest.json");
  REQUIRE(loaded.ok());

  int checked = 0;
  for (const auto& entry : std::filesystem::directory_iterator(out / "transcripts")) {
    auto name = entry.path().filename().string();
    bool tool_condition = name.find("memory_feedback") != std::string::npos ||
                          name.find("zero_shot") != std::string::npos;
    if (!tool_condition) continue;
    ++checked;
    std::ifstream in(entry.path());
    std::string line;
    while (std::getline(in, line)) {
      Json j = Json::parse(line, nullptr, false);
      REQUIRE(!j.is_discarded());
      std::string text = j.value("text", "");
      for (const auto& rubric : loaded.value().set.rubrics) {
        CAPTURE(name);
        CHECK(text.find(rubric.full_text) == std::string::npos);
      }
    }
  }
  CHECK(checked == 30);  // 5 categories x 2 tool conditions x 3 steps
}

TEST_CASE("mixed fixture run: memory growth and final aggregates") {
  TempDir dir;
  auto result = run_from_config(kSampleToml, (dir.path() / "out").string());
  CHECK(result.records.size() == 24);

  std::int64_t previous = 0;
  for (const auto& r : result.records) {
    if (r.condition != "memory_feedback") continue;
    CHECK(r.memory_file_count_after >= previous);
    previous = r.memory_file_count_after;
  }
  CHECK(previous == 8);

  const Json& conditions = result.report.at("conditions");
  double memory_final = conditions.at("memory_feedback").at("final_aggregate").at("mean");
  double zero_final = conditions.at("zero_shot").at("final_aggregate").at("mean");
  CHECK(memory_final > zero_final);
}

TEST_CASE("missing price entry fails the run up front") {
  TempDir dir;
  auto cfg = config::load_run_config(kContinualToml);
  REQUIRE(cfg.ok());
  RunConfig rc = cfg.value();
  rc.output_dir = (dir.path() / "out").string();
  rc.price_table.clear();
  rc.price_table["some-other-model"] = {1.0, 2.0};
  auto loaded = bench::load_benchmark(rc.benchmark_path);
  REQUIRE(loaded.ok());
  auto backend = make_backend(rc.agent.backend);
  REQUIRE(backend.ok());
  eval::OracleJudge judge;
  auto result = run_protocol(rc, loaded.value().set, *backend.value(), judge);
  REQUIRE(!result.ok());
  CHECK(result.code() == Errc::missing_price);
}

TEST_CASE("failed episodes are recorded and excluded from means") {
  TempDir dir;
  // A judge that fails on one specific scenario's answer.
  class FlakyJudge final : public eval::Judge {
   public:
    Result<eval::Verdict> evaluate(const bench::Rubric& rubric,
                                   const std::string& response) override {
      if (++calls_ == 2) return make_error(Errc::missing_score, "judge melted down");
      return oracle_.evaluate(rubric, response);
    }
    std::string name() const override { return "flaky"; }

   private:
    eval::OracleJudge oracle_;
    int calls_ = 0;
  };

  auto cfg = config::load_run_config(kContinualToml);
  REQUIRE(cfg.ok());
  RunConfig rc = cfg.value();
  rc.output_dir = (dir.path() / "out").string();
  auto loaded = bench::load_benchmark(rc.benchmark_path);
  REQUIRE(loaded.ok());
  auto backend = make_backend(rc.agent.backend);
  REQUIRE(backend.ok());

  // The failed judge call suppresses that step's feedback turns, so the
  // positional replay drifts afterwards; the run must still complete with
  // every breakage recorded as a failed episode.
  FlakyJudge judge;
  auto result = run_protocol(rc, loaded.value().set, *backend.value(), judge);
  REQUIRE(result.ok());

  int failed = 0;
  for (const auto& r : result.value().records)
    if (r.failed) {
      ++failed;
      CHECK(!r.has_verdict);
      CHECK(!r.error.empty());
    }
  CHECK(failed >= 1);
  CHECK(result.value().report.at("failed_episodes").get<int>() == failed);
}

TEST_CASE("api keys never appear in any emitted run artifact") {
  TempDir dir;
  setenv("FEEDMEM_HARNESS_KEY", "sk-harness-sentinel", 1);

  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    Json reply{{"choices", Json::array({{{"message", {{"role", "assistant"},
                                                      {"content", "a plain answer"}}},
                                         {"finish_reason", "stop"}}})},
               {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 4}}}};
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread listener([&server] { server.listen_after_bind(); });
  server.wait_until_ready();

  RunConfig rc;
  rc.protocol = Protocol::continual;
  rc.horizon = 1;
  rc.conditions = {agent::Condition::zero_shot};
  rc.categories = {"film_review"};
  rc.output_dir = (dir.path() / "out").string();
  rc.price_table["live-test-model"] = {3.0, 15.0};
  rc.agent.backend.kind = BackendKind::wire;
  rc.agent.backend.endpoint =
      "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  rc.agent.backend.model_name = "live-test-model";
  rc.agent.backend.api_key_env = "FEEDMEM_HARNESS_KEY";

  auto loaded =
      bench::load_benchmark(std::string(FEEDMEM_DATA_DIR) + "/benchmark/manifest.json");
  REQUIRE(loaded.ok());
  WireBackend wire(rc.agent.backend);
  RecordingBackend recorder(wire);
  eval::OracleJudge judge;
  auto result = run_protocol(rc, loaded.value().set, recorder, judge);
  auto capture = dir.path() / "out" / "capture.jsonl";
  REQUIRE(recorder.save(capture.string()).ok());
  server.stop();
  listener.join();
  REQUIRE(result.ok());
  REQUIRE(result.value().records.size() == 1);
  CHECK(!result.value().records[0].failed);

  for (auto it = std::filesystem::recursive_directory_iterator(dir.path() / "out");
       it != std::filesystem::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    auto contents = feedmem::testing::read_text_file(it->path());
    CAPTURE(it->path().string());
    CHECK(contents.find("sk-harness-sentinel") == std::string::npos);
  }
}

TEST_CASE("two identical runs produce byte-identical outputs") {
  TempDir dir;
  auto a = run_from_config(kSampleToml, (dir.path() / "a").string());
  auto b = run_from_config(kSampleToml, (dir.path() / "b").string());
  CHECK(feedmem::testing::read_text_file(dir.path() / "a" / "records.jsonl") ==
        feedmem::testing::read_text_file(dir.path() / "b" / "records.jsonl"));
  CHECK(feedmem::testing::read_text_file(dir.path() / "a" / "report.json") ==
        feedmem::testing::read_text_file(dir.path() / "b" / "report.json"));
  CHECK(!feedmem::testing::read_text_file(dir.path() / "a" / "records.jsonl").empty());
}

TEST_CASE("report regeneration from records is identical to the original") {
  TempDir dir;
  auto result = run_from_config(kSampleToml, (dir.path() / "out").string());
  auto loaded = load_records_jsonl((dir.path() / "out" / "records.jsonl").string());
  REQUIRE(loaded.ok());
  CHECK(build_report(loaded.value()).dump(2) + "\n" ==
        feedmem::testing::read_text_file(dir.path() / "out" / "report.json"));
}

TEST_CASE("write_outputs emits the full artifact set") {
  TempDir dir;
  auto out = dir.path() / "out";
  run_from_config(kSampleToml, out.string());
  for (const char* name :
       {"records.jsonl", "report.json", "curves.csv", "pareto.csv", "pareto.svg"})
    CHECK(std::filesystem::exists(out / name));
  auto svg = feedmem::testing::read_text_file(out / "pareto.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("memory_feedback") != std::string::npos);
  auto csv = feedmem::testing::read_text_file(out / "curves.csv");
  CHECK(csv.rfind("protocol,condition,step", 0) == 0);
}
