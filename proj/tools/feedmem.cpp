// Operator CLI: batch entry points over the library.
//
// Verbs:
//   run            execute a configured protocol and write run outputs
//   judge          score one response file against a rubric
//   inspect-memory list or print memory files from a run's root
//   report         regenerate report files from a records.jsonl
//   validate-data  check a benchmark file against the schema
//   record-fixture run a protocol while capturing a replayable transcript
//
// Exit codes: 0 success, 1 not found (inspect-memory), 2 configuration or
// data error, 3 run failure, 4 unparseable judge output.

#include <CLI11.hpp>

#include <iostream>

#include "feedmem/config.hpp"

using namespace feedmem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotFound = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRunFailure = 3;
constexpr int kExitBadJudgeOutput = 4;

struct RunFlags {
  std::string config_path;
  std::string protocol;
  std::string conditions;
  std::string backend;
  std::string output_dir;
  std::int64_t seed = -1;

  config::Overrides overrides() const {
    config::Overrides o;
    if (!protocol.empty()) o.protocol = protocol;
    if (!conditions.empty()) o.conditions = conditions;
    if (!backend.empty()) o.backend = backend;
    if (!output_dir.empty()) o.output_dir = output_dir;
    if (seed >= 0) o.seed = static_cast<std::uint64_t>(seed);
    return o;
  }
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Run config file (TOML or JSON)")->required();
  cmd->add_option("--protocol", flags.protocol, "Override: continual | mixed");
  cmd->add_option("--seed", flags.seed, "Override: single seed");
  cmd->add_option("--conditions", flags.conditions,
                  "Override: comma-separated condition names");
  cmd->add_option("--backend", flags.backend, "Override: 'wire' or 'replay:<path>'");
  cmd->add_option("--output-dir", flags.output_dir, "Override: output directory");
}

struct Prepared {
  harness::RunConfig cfg;
  bench::BenchmarkSet set;
  std::unique_ptr<Backend> backend;
  std::vector<std::unique_ptr<Backend>> judge_backends;
  std::unique_ptr<eval::Judge> judge;
};

int prepare(const RunFlags& flags, Prepared& out) {
  auto cfg = config::load_run_config(flags.config_path, flags.overrides());
  if (!cfg.ok()) {
    std::cerr << "error: " << cfg.error().to_string() << "\n";
    return kExitConfig;
  }
  out.cfg = cfg.take();

  auto loaded = bench::load_benchmark(out.cfg.benchmark_path);
  if (!loaded.ok()) {
    std::cerr << "error: benchmark: " << loaded.error().to_string() << "\n";
    return kExitConfig;
  }
  for (const auto& w : loaded.value().report.warnings)
    std::cerr << "warning: " << w.where << ": " << w.message << "\n";
  out.set = loaded.value().set;

  auto backend = harness::make_backend(out.cfg.agent.backend);
  if (!backend.ok()) {
    std::cerr << "error: agent backend: " << backend.error().to_string() << "\n";
    return kExitConfig;
  }
  out.backend = backend.take();

  auto judge = harness::make_judge(out.cfg.judge_kind, out.cfg.judge_backend,
                                   out.judge_backends);
  if (!judge.ok()) {
    std::cerr << "error: judge: " << judge.error().to_string() << "\n";
    return kExitConfig;
  }
  out.judge = judge.take();
  return kExitOk;
}

int cmd_run(const RunFlags& flags) {
  Prepared p;
  if (int rc = prepare(flags, p); rc != kExitOk) return rc;
  auto result = harness::run_protocol(p.cfg, p.set, *p.backend, *p.judge);
  if (!result.ok()) {
    std::cerr << "error: run failed: " << result.error().to_string() << "\n";
    return kExitRunFailure;
  }
  std::cerr << "run complete: " << result.value().records.size() << " episodes, outputs in "
            << (p.cfg.output_dir.empty() ? "(no output_dir)" : p.cfg.output_dir) << "\n";
  return kExitOk;
}

int cmd_record_fixture(const RunFlags& flags, const std::string& out_path) {
  Prepared p;
  if (int rc = prepare(flags, p); rc != kExitOk) return rc;
  RecordingBackend recorder(*p.backend);
  auto result = harness::run_protocol(p.cfg, p.set, recorder, *p.judge);
  if (!result.ok()) {
    std::cerr << "error: run failed: " << result.error().to_string() << "\n";
    return kExitRunFailure;
  }
  if (auto st = recorder.save(out_path); !st.ok()) {
    std::cerr << "error: " << st.error().to_string() << "\n";
    return kExitRunFailure;
  }
  std::cerr << "captured " << recorder.events().size() << " events to " << out_path << "\n";
  return kExitOk;
}

// Judge spec: "oracle" | "replay:<path>" | "wire:<endpoint>,<model>".
Result<std::unique_ptr<eval::Judge>> judge_from_spec(
    const std::string& spec, const std::string& api_key_env, const std::string& wire_format,
    std::vector<std::unique_ptr<Backend>>& keep) {
  if (spec == "oracle") return std::unique_ptr<eval::Judge>(new eval::OracleJudge());
  BackendConfig cfg;
  if (spec.rfind("replay:", 0) == 0) {
    cfg.kind = BackendKind::replay;
    cfg.replay_path = spec.substr(7);
    cfg.model_name = "replay-judge";
  } else if (spec.rfind("wire:", 0) == 0) {
    auto parts = split(spec.substr(5), ',');
    if (parts.size() != 2)
      return make_error(Errc::config_error, "wire judge spec must be wire:<endpoint>,<model>");
    cfg.kind = BackendKind::wire;
    cfg.endpoint = parts[0];
    cfg.model_name = parts[1];
    cfg.api_key_env = api_key_env;
    if (wire_format == "anthropic_messages") cfg.wire_format = WireFormat::anthropic_messages;
  } else {
    return make_error(Errc::config_error,
                      "judge spec must be oracle, replay:<path> or wire:<endpoint>,<model>");
  }
  auto backend = harness::make_backend(cfg);
  if (!backend.ok()) return backend.error();
  keep.push_back(backend.take());
  return std::unique_ptr<eval::Judge>(new eval::LlmJudge(*keep.back()));
}

int cmd_judge(const std::string& benchmark_path, const std::string& rubric_id,
              const std::string& response_path, const std::string& judge_spec,
              const std::string& api_key_env, const std::string& wire_format) {
  auto loaded = bench::load_benchmark(benchmark_path);
  if (!loaded.ok()) {
    std::cerr << "error: benchmark: " << loaded.error().to_string() << "\n";
    return kExitConfig;
  }
  const bench::Rubric* rubric = loaded.value().set.find_rubric(rubric_id);
  if (!rubric) {
    std::cerr << "error: no rubric named '" << rubric_id << "'\n";
    return kExitConfig;
  }
  std::ifstream in(response_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open response file " << response_path << "\n";
    return kExitConfig;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string response = ss.str();

  eval::Verdict verdict;
  if (judge_spec == "oracle") {
    auto v = eval::OracleJudge().evaluate(*rubric, response);
    if (!v.ok()) {
      std::cerr << "error: " << v.error().to_string() << "\n";
      return kExitRunFailure;
    }
    verdict = v.take();
  } else {
    // Drive the pipeline step by step so unparseable judge output can be
    // echoed for debugging.
    std::vector<std::unique_ptr<Backend>> keep;
    auto judge = judge_from_spec(judge_spec, api_key_env, wire_format, keep);
    if (!judge.ok()) {
      std::cerr << "error: " << judge.error().to_string() << "\n";
      return kExitConfig;
    }
    GenerationRequest request;
    request.messages.push_back(
        ChatMessage::make_user(eval::build_judge_prompt(*rubric, response)));
    request.temperature = 0.0;
    auto generated = keep.back()->generate(request);
    if (!generated.ok()) {
      std::cerr << "error: " << generated.error().to_string() << "\n";
      return kExitRunFailure;
    }
    auto parsed = eval::parse_verdict(generated.value().message.text, rubric->scale);
    if (!parsed.ok()) {
      std::cerr << "error: " << parsed.error().to_string() << "\n"
                << "--- raw judge output ---\n"
                << generated.value().message.text << "\n";
      return kExitBadJudgeOutput;
    }
    verdict.critique = parsed.value().critique;
    verdict.raw_score = parsed.value().raw_score;
    verdict.clamped = parsed.value().clamped;
    verdict.normalized = eval::normalize(verdict.raw_score, rubric->scale, rubric->target_pole);
    verdict.judge_usage = generated.value().usage;
  }

  Json out{{"rubric_id", rubric_id},
           {"scale", bench::scale_name(rubric->scale)},
           {"critique", verdict.critique},
           {"raw_score", verdict.raw_score},
           {"normalized", verdict.normalized},
           {"clamped", verdict.clamped},
           {"judge_usage", usage_to_json(verdict.judge_usage)}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_inspect_memory(const std::string& root_dir, const std::string& path) {
  if (!std::filesystem::is_directory(root_dir)) {
    std::cerr << "error: no memory root at " << root_dir << "\n";
    return kExitNotFound;
  }
  memory::MemoryRoot root{root_dir, "inspect", system_now};
  if (path.empty()) {
    auto listing = memory::list_files(root, "/memories/");
    if (!listing.ok()) {
      std::cerr << "error: " << listing.error().to_string() << "\n";
      return kExitNotFound;
    }
    for (const auto& e : listing.value().entries)
      std::cout << e.path << "  (" << e.line_count << (e.line_count == 1 ? " line" : " lines")
                << ", modified " << e.modified_at << ")\n";
    if (listing.value().entries.empty()) std::cout << "(empty)\n";
    return kExitOk;
  }
  auto file = memory::read_file(root, path);
  if (!file.ok()) {
    std::cerr << "error: " << file.error().to_string() << "\n";
    return kExitNotFound;
  }
  std::cout << "created_at: " << file.value().created_at << "\n"
            << "modified_at: " << file.value().modified_at << "\n\n"
            << join(file.value().content, "\n") << "\n";
  return kExitOk;
}

int cmd_report(const std::string& records_path, const std::string& output_dir) {
  auto records = harness::load_records_jsonl(records_path);
  if (!records.ok()) {
    std::cerr << "error: " << records.error().to_string() << "\n";
    return kExitConfig;
  }
  Json report = harness::build_report(records.value());
  if (!output_dir.empty()) {
    if (auto st = harness::write_outputs(records.value(), report, output_dir); !st.ok()) {
      std::cerr << "error: " << st.error().to_string() << "\n";
      return kExitRunFailure;
    }
    std::cerr << "report files written to " << output_dir << "\n";
  }
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_validate_data(const std::string& data_path) {
  auto loaded = bench::load_benchmark(data_path);
  Json out;
  if (!loaded.ok()) {
    out = Json{{"valid", false},
               {"errors", Json::array({Json{{"where", data_path},
                                            {"message", loaded.error().to_string()}}})},
               {"warnings", Json::array()}};
    std::cout << out.dump(2) << "\n";
    return kExitConfig;
  }
  const auto& set = loaded.value().set;
  out = loaded.value().report.to_json();
  out["valid"] = loaded.value().report.errors.empty();
  out["categories"] = set.categories().size();
  out["rubrics"] = set.rubrics.size();
  out["scenarios"] = set.scenarios.size();
  std::cout << out.dump(2) << "\n";
  return loaded.value().report.errors.empty() ? kExitOk : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agent memory experiment harness"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Execute a configured protocol");
  add_run_flags(run, run_flags);

  std::string judge_benchmark, judge_rubric, judge_response, judge_spec = "oracle";
  std::string judge_key_env, judge_wire_format = "openai_chat";
  CLI::App* judge = app.add_subcommand("judge", "Score one response against a rubric");
  judge->add_option("--benchmark", judge_benchmark, "Benchmark manifest or document")->required();
  judge->add_option("--rubric", judge_rubric, "Rubric id")->required();
  judge->add_option("--response", judge_response, "File holding the response text")->required();
  judge->add_option("--backend", judge_spec,
                    "oracle | replay:<path> | wire:<endpoint>,<model>");
  judge->add_option("--api-key-env", judge_key_env, "Env var holding the API key (wire)");
  judge->add_option("--wire-format", judge_wire_format,
                    "openai_chat | anthropic_messages (wire)");

  std::string inspect_root, inspect_path;
  CLI::App* inspect = app.add_subcommand("inspect-memory", "List or print memory files");
  inspect->add_option("--root", inspect_root, "Memory root directory")->required();
  inspect->add_option("--path", inspect_path, "Memory path to print, e.g. /memories/x.txt");

  std::string report_records, report_out;
  CLI::App* report = app.add_subcommand("report", "Regenerate reports from records.jsonl");
  report->add_option("--records", report_records, "records.jsonl from a run")->required();
  report->add_option("--output-dir", report_out, "Directory for regenerated report files");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate-data", "Validate a benchmark file");
  validate->add_option("--data", validate_path, "Benchmark manifest or document")->required();

  RunFlags record_flags;
  std::string record_out;
  CLI::App* record = app.add_subcommand("record-fixture",
                                        "Run a protocol while capturing a replay transcript");
  add_run_flags(record, record_flags);
  record->add_option("--out", record_out, "Replay file to write")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(run_flags);
  if (judge->parsed())
    return cmd_judge(judge_benchmark, judge_rubric, judge_response, judge_spec, judge_key_env,
                     judge_wire_format);
  if (inspect->parsed()) return cmd_inspect_memory(inspect_root, inspect_path);
  if (report->parsed()) return cmd_report(report_records, report_out);
  if (validate->parsed()) return cmd_validate_data(validate_path);
  if (record->parsed()) return cmd_record_fixture(record_flags, record_out);
  return kExitConfig;
}
