// Regenerates the bundled replay fixtures by running the scripted policy
// through the real harness (with the oracle judge) and recording every
// generate() call. After writing a fixture it replays it through the same
// config and verifies the episode records come out identical.
//
//   gen_fixtures --config data/configs/sample.toml --out data/fixtures/mixed.jsonl

#include <CLI11.hpp>

#include <iostream>

#include "feedmem/config.hpp"
#include "feedmem/scripted_policy.hpp"

using namespace feedmem;

namespace {

// The scripted answers must hit exactly the intended rubric criteria,
// otherwise the authored learning curves silently drift.
bool check_authoring(const bench::BenchmarkSet& set) {
  scripted::ScriptedBackend policy(set);
  eval::OracleJudge oracle;
  bool ok = true;
  for (const auto& scenario : set.scenarios) {
    const bench::Rubric* rubric = set.find_rubric(scenario.rubric_id);
    auto base = oracle.evaluate(*rubric, policy.base_answer(scenario));
    if (!base.ok() || std::abs(base.value().normalized - rubric->dimensions[0].weight) > 1e-9) {
      std::cerr << "authoring check failed: base answer for " << scenario.scenario_id
                << " scores " << (base.ok() ? fmt_double(base.value().normalized) : "error")
                << ", expected " << fmt_double(rubric->dimensions[0].weight) << "\n";
      ok = false;
    }
    std::vector<std::string> all_keywords;
    for (std::size_t d = 1; d < rubric->dimensions.size(); ++d)
      for (const auto& kw : rubric->dimensions[d].checklist) all_keywords.push_back(kw);
    auto full = oracle.evaluate(*rubric, policy.answer_with_notes(scenario, all_keywords));
    if (!full.ok() || std::abs(full.value().normalized - 1.0) > 1e-9) {
      std::cerr << "authoring check failed: full answer for " << scenario.scenario_id
                << " scores " << (full.ok() ? fmt_double(full.value().normalized) : "error")
                << ", expected 1\n";
      ok = false;
    }
  }
  return ok;
}

Json records_digest(const std::vector<harness::EpisodeRecord>& records) {
  Json arr = Json::array();
  for (const auto& r : records) arr.push_back(r.to_json());
  return arr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regenerate bundled replay fixtures from the scripted policy"};
  std::string config_path, out_path;
  app.add_option("--config", config_path, "Run config (TOML or JSON)")->required();
  app.add_option("--out", out_path, "Fixture file to write")->required();
  CLI11_PARSE(app, argc, argv);

  auto cfg = config::load_run_config(config_path);
  if (!cfg.ok()) {
    std::cerr << "config error: " << cfg.error().to_string() << "\n";
    return 2;
  }
  auto loaded = bench::load_benchmark(cfg.value().benchmark_path);
  if (!loaded.ok()) {
    std::cerr << "benchmark error: " << loaded.error().to_string() << "\n";
    return 2;
  }
  const auto& set = loaded.value().set;
  if (!check_authoring(set)) return 3;

  auto scratch = std::filesystem::temp_directory_path() / "feedmem-genfix";
  std::filesystem::remove_all(scratch);

  harness::RunConfig run_cfg = cfg.value();
  run_cfg.output_dir = (scratch / "record").string();
  run_cfg.deterministic_clock = true;

  scripted::ScriptedBackend policy(set);
  RecordingBackend recorder(policy);
  eval::OracleJudge judge;
  auto recorded = harness::run_protocol(run_cfg, set, recorder, judge);
  if (!recorded.ok()) {
    std::cerr << "recording run failed: " << recorded.error().to_string() << "\n";
    return 3;
  }
  if (auto st = recorder.save(out_path); !st.ok()) {
    std::cerr << "cannot save fixture: " << st.error().to_string() << "\n";
    return 3;
  }
  std::cout << "wrote " << out_path << " (" << recorder.events().size() << " events)\n";

  // Replay through the same config and confirm the records match.
  harness::RunConfig replay_cfg = cfg.value();
  replay_cfg.output_dir = (scratch / "replay").string();
  replay_cfg.agent.backend.kind = BackendKind::replay;
  replay_cfg.agent.backend.replay_path = out_path;
  replay_cfg.agent.backend.model_name = policy.model_name();
  auto backend = harness::make_backend(replay_cfg.agent.backend);
  if (!backend.ok()) {
    std::cerr << "replay open failed: " << backend.error().to_string() << "\n";
    return 3;
  }
  auto replayed = harness::run_protocol(replay_cfg, set, *backend.value(), judge);
  if (!replayed.ok()) {
    std::cerr << "verification replay failed: " << replayed.error().to_string() << "\n";
    return 3;
  }
  if (records_digest(recorded.value().records).dump() !=
      records_digest(replayed.value().records).dump()) {
    std::cerr << "verification failed: replayed records differ from recorded run\n";
    return 3;
  }
  std::cout << "verified: replay reproduces " << replayed.value().records.size()
            << " episode records\n";
  std::filesystem::remove_all(scratch);
  return 0;
}
