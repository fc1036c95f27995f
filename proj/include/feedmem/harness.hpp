#pragma once

// End-to-end experiment runner: executes the continual and mixed protocols
// over a benchmark, aggregates scores and costs, and emits the run outputs
// (records.jsonl, report.json, curves.csv, pareto.csv, pareto.svg and
// per-episode transcripts).
//
// Episodes are strictly sequential: replay backends are positional, and a
// memory_feedback cell threads one root through its whole sequence.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "feedmem/agent_runtime.hpp"
#include "feedmem/benchmark.hpp"
#include "feedmem/evaluator.hpp"
#include "feedmem/wire_backend.hpp"

namespace feedmem::harness {

using agent::AgentConfig;
using agent::Condition;
using bench::BenchmarkSet;
using eval::Judge;

enum class Protocol { continual, mixed };

inline const char* protocol_name(Protocol p) {
  return p == Protocol::continual ? "continual" : "mixed";
}

inline std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "continual") return Protocol::continual;
  if (s == "mixed") return Protocol::mixed;
  return std::nullopt;
}

enum class JudgeKind { oracle, llm };

struct PriceEntry {
  double input_per_mtok = 0.0;   // dollars per million input tokens
  double output_per_mtok = 0.0;  // dollars per million output tokens
};

struct RunConfig {
  Protocol protocol = Protocol::continual;
  int horizon = 3;
  std::vector<Condition> conditions;
  std::vector<std::uint64_t> seeds{1};
  AgentConfig agent;
  JudgeKind judge_kind = JudgeKind::oracle;
  BackendConfig judge_backend;
  std::map<std::string, PriceEntry> price_table;
  std::string benchmark_path;
  std::string output_dir;
  bool anti_adjacent = true;
  std::vector<std::string> categories;      // empty = every category
  std::optional<bool> deterministic_clock;  // default: replay backends only
};

// ---------------------------------------------------------------------------

struct EpisodeRecord {
  std::string run_id;  // cell identifier
  std::string protocol;
  std::string condition;
  int step_index = 0;  // 1-based within the cell
  std::uint64_t seed = 0;
  std::string scenario_id;
  std::string category;
  std::string final_text;

  bool failed = false;
  std::string error;

  bool has_verdict = false;
  std::string critique;
  double raw_score = 0.0;
  double normalized = 0.0;
  bool clamped = false;

  UsageStats usage_agent_answer;
  UsageStats usage_agent_feedback;
  UsageStats usage_judge;
  int generation_calls_answer = 0;
  int generation_calls_feedback = 0;
  int tool_iterations_answer = 0;
  bool retrieved = false;

  std::string agent_model;
  std::string judge_name;
  double cost_usd = 0.0;              // answer + feedback + judge, at price_table rates
  double cost_answer_only_usd = 0.0;  // steady-state share (answer-phase agent calls)
  std::int64_t memory_file_count_after = 0;

  Json to_json() const {
    Json verdict = nullptr;
    if (has_verdict)
      verdict = Json{{"critique", critique},
                     {"raw_score", raw_score},
                     {"normalized", normalized},
                     {"clamped", clamped}};
    return Json{{"v", 1},
                {"run_id", run_id},
                {"protocol", protocol},
                {"condition", condition},
                {"step_index", step_index},
                {"seed", seed},
                {"scenario_id", scenario_id},
                {"category", category},
                {"final_text", final_text},
                {"failed", failed},
                {"error", error},
                {"verdict", verdict},
                {"usage", Json{{"agent_answer", usage_to_json(usage_agent_answer)},
                               {"agent_feedback", usage_to_json(usage_agent_feedback)},
                               {"judge", usage_to_json(usage_judge)}}},
                {"generation_calls_answer", generation_calls_answer},
                {"generation_calls_feedback", generation_calls_feedback},
                {"tool_iterations_answer", tool_iterations_answer},
                {"retrieved", retrieved},
                {"agent_model", agent_model},
                {"judge_name", judge_name},
                {"cost_usd", cost_usd},
                {"cost_answer_only_usd", cost_answer_only_usd},
                {"memory_file_count_after", memory_file_count_after}};
  }

  static Result<EpisodeRecord> from_json(const Json& j) {
    if (!j.is_object() || j.value("v", 0) != 1)
      return make_error(Errc::parse_error, "unsupported episode record");
    EpisodeRecord r;
    r.run_id = j.value("run_id", "");
    r.protocol = j.value("protocol", "");
    r.condition = j.value("condition", "");
    r.step_index = j.value("step_index", 0);
    r.seed = j.value("seed", std::uint64_t{0});
    r.scenario_id = j.value("scenario_id", "");
    r.category = j.value("category", "");
    r.final_text = j.value("final_text", "");
    r.failed = j.value("failed", false);
    r.error = j.value("error", "");
    if (j.contains("verdict") && j.at("verdict").is_object()) {
      r.has_verdict = true;
      const Json& v = j.at("verdict");
      r.critique = v.value("critique", "");
      r.raw_score = v.value("raw_score", 0.0);
      r.normalized = v.value("normalized", 0.0);
      r.clamped = v.value("clamped", false);
    }
    const Json& u = j.value("usage", Json::object());
    r.usage_agent_answer = usage_from_json(u.value("agent_answer", Json::object()));
    r.usage_agent_feedback = usage_from_json(u.value("agent_feedback", Json::object()));
    r.usage_judge = usage_from_json(u.value("judge", Json::object()));
    r.generation_calls_answer = j.value("generation_calls_answer", 0);
    r.generation_calls_feedback = j.value("generation_calls_feedback", 0);
    r.tool_iterations_answer = j.value("tool_iterations_answer", 0);
    r.retrieved = j.value("retrieved", false);
    r.agent_model = j.value("agent_model", "");
    r.judge_name = j.value("judge_name", "");
    r.cost_usd = j.value("cost_usd", 0.0);
    r.cost_answer_only_usd = j.value("cost_answer_only_usd", 0.0);
    r.memory_file_count_after = j.value("memory_file_count_after", std::int64_t{0});
    return r;
  }
};

inline Status write_records_jsonl(const std::vector<EpisodeRecord>& records,
                                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return make_error(Errc::io_error, "cannot write " + path.string());
  for (const auto& r : records) out << r.to_json().dump() << "\n";
  return out.good() ? ok_status() : Status(make_error(Errc::io_error, "short write"));
}

inline Result<std::vector<EpisodeRecord>> load_records_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return make_error(Errc::io_error, "cannot open " + path);
  std::vector<EpisodeRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) return make_error(Errc::parse_error, "invalid JSON in " + path);
    auto r = EpisodeRecord::from_json(j);
    if (!r.ok()) return r.error();
    records.push_back(r.take());
  }
  return records;
}

// ---------------------------------------------------------------------------
// Aggregation: arithmetic mean and sample (n-1) standard deviation.

struct StatPoint {
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
};

inline Result<StatPoint> aggregate(const std::vector<double>& values) {
  if (values.empty()) return make_error(Errc::empty_input, "aggregate of empty list");
  StatPoint p;
  p.n = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  p.mean = sum / static_cast<double>(p.n);
  if (p.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - p.mean) * (v - p.mean);
    p.stddev = std::sqrt(ss / static_cast<double>(p.n - 1));
  }
  return p;
}

// The +/- column is reported as sample standard deviation; the standard
// error of the mean rides alongside so either spread convention can be
// read off directly.
inline Json stat_to_json(const StatPoint& p) {
  double sem = p.n > 0 ? p.stddev / std::sqrt(static_cast<double>(p.n)) : 0.0;
  return Json{{"mean", p.mean}, {"std", p.stddev}, {"sem", sem}, {"n", p.n}};
}

// ---------------------------------------------------------------------------
// Cost accounting

inline double usage_cost(const UsageStats& usage, const PriceEntry& price) {
  return static_cast<double>(usage.input_tokens) * price.input_per_mtok / 1e6 +
         static_cast<double>(usage.output_tokens) * price.output_per_mtok / 1e6;
}

inline Result<PriceEntry> price_for(const std::map<std::string, PriceEntry>& table,
                                    const std::string& model) {
  auto it = table.find(model);
  if (it == table.end())
    return make_error(Errc::missing_price, "no price entry for model '" + model + "'");
  return it->second;
}

struct CostPoint {
  std::string condition;
  double mean_cost_usd = 0.0;              // amortized: answer + feedback + judge
  double mean_cost_answer_only_usd = 0.0;  // steady-state view
  double mean_score = 0.0;
  bool pareto = false;
};

// Per condition: (mean cost per task, mean normalized score) over scored
// episodes; the Pareto-dominant subset is flagged on the amortized cost.
inline std::vector<CostPoint> cost_report(const std::vector<EpisodeRecord>& records) {
  std::map<std::string, std::vector<const EpisodeRecord*>> by_condition;
  for (const auto& r : records)
    if (!r.failed) by_condition[r.condition].push_back(&r);

  std::vector<CostPoint> points;
  for (const auto& [condition, recs] : by_condition) {
    CostPoint p;
    p.condition = condition;
    double cost = 0.0, answer_cost = 0.0, score = 0.0;
    for (const auto* r : recs) {
      cost += r->cost_usd;
      answer_cost += r->cost_answer_only_usd;
      score += r->normalized;
    }
    auto n = static_cast<double>(recs.size());
    p.mean_cost_usd = cost / n;
    p.mean_cost_answer_only_usd = answer_cost / n;
    p.mean_score = score / n;
    points.push_back(p);
  }

  for (auto& a : points) {
    a.pareto = true;
    for (const auto& b : points) {
      if (a.condition == b.condition) continue;
      bool dominates = b.mean_cost_usd <= a.mean_cost_usd && b.mean_score >= a.mean_score &&
                       (b.mean_cost_usd < a.mean_cost_usd || b.mean_score > a.mean_score);
      if (dominates) a.pareto = false;
    }
  }
  return points;
}

// ---------------------------------------------------------------------------
// Report building: every number is recomputed from the records, so a report
// regenerated later from records.jsonl is byte-identical.

inline Json build_report(const std::vector<EpisodeRecord>& records) {
  Json report = Json::object();
  std::string protocol = records.empty() ? "" : records.front().protocol;
  report["protocol"] = protocol;
  report["episodes"] = records.size();

  std::set<std::string> conditions;
  int max_step = 0;
  std::size_t failed = 0;
  for (const auto& r : records) {
    conditions.insert(r.condition);
    max_step = std::max(max_step, r.step_index);
    if (r.failed) ++failed;
  }
  report["failed_episodes"] = failed;

  Json by_condition = Json::object();
  for (const auto& condition : conditions) {
    Json entry = Json::object();

    // Learning curve: per step, mean +/- sample std of normalized scores.
    Json curve = Json::array();
    Json growth = Json::array();
    for (int step = 1; step <= max_step; ++step) {
      std::vector<double> scores;
      std::vector<double> counts;
      for (const auto& r : records) {
        if (r.condition != condition || r.step_index != step) continue;
        if (!r.failed && r.has_verdict) scores.push_back(r.normalized);
        counts.push_back(static_cast<double>(r.memory_file_count_after));
      }
      if (scores.empty()) continue;
      auto stat = aggregate(scores);
      Json point = stat_to_json(stat.value());
      point["step"] = step;
      curve.push_back(point);
      growth.push_back(aggregate(counts).value().mean);
    }
    entry["curve"] = curve;
    entry["memory_growth"] = growth;

    // Mixed protocol: aggregate over the final occurrence of each category
    // within each (seed, cell).
    if (protocol == "mixed") {
      std::map<std::pair<std::uint64_t, std::string>, const EpisodeRecord*> finals;
      for (const auto& r : records) {
        if (r.condition != condition || r.failed || !r.has_verdict) continue;
        auto key = std::make_pair(r.seed, r.category);
        auto it = finals.find(key);
        if (it == finals.end() || r.step_index > it->second->step_index) finals[key] = &r;
      }
      std::vector<double> final_scores;
      for (const auto& [key, rec] : finals) final_scores.push_back(rec->normalized);
      if (!final_scores.empty())
        entry["final_aggregate"] = stat_to_json(aggregate(final_scores).value());
    }

    // Totals and per-task means.
    UsageStats agent_total, judge_total;
    double cost = 0.0, cost_answer = 0.0, score_sum = 0.0;
    int scored = 0, retrievals = 0, calls_answer = 0, calls_feedback = 0;
    int episodes = 0;
    for (const auto& r : records) {
      if (r.condition != condition) continue;
      ++episodes;
      agent_total += r.usage_agent_answer;
      agent_total += r.usage_agent_feedback;
      judge_total += r.usage_judge;
      cost += r.cost_usd;
      cost_answer += r.cost_answer_only_usd;
      calls_answer += r.generation_calls_answer;
      calls_feedback += r.generation_calls_feedback;
      if (r.retrieved) ++retrievals;
      if (!r.failed && r.has_verdict) {
        score_sum += r.normalized;
        ++scored;
      }
    }
    entry["episodes"] = episodes;
    entry["totals"] = Json{{"agent", usage_to_json(agent_total)},
                           {"judge", usage_to_json(judge_total)},
                           {"cost_usd", cost},
                           {"cost_answer_only_usd", cost_answer}};
    if (episodes > 0) {
      entry["mean_cost_usd"] = cost / episodes;
      entry["mean_cost_answer_only_usd"] = cost_answer / episodes;
      entry["mean_generation_calls_answer"] =
          static_cast<double>(calls_answer) / episodes;
      entry["mean_generation_calls_feedback"] =
          static_cast<double>(calls_feedback) / episodes;
      entry["retrieval_rate"] = static_cast<double>(retrievals) / episodes;
    }
    if (scored > 0) entry["mean_normalized_score"] = score_sum / scored;

    by_condition[condition] = entry;
  }
  report["conditions"] = by_condition;

  // Global totals accumulated in record order, so they equal a direct sum
  // over records.jsonl bit for bit.
  {
    UsageStats agent_total, judge_total;
    double cost = 0.0, cost_answer = 0.0;
    for (const auto& r : records) {
      agent_total += r.usage_agent_answer;
      agent_total += r.usage_agent_feedback;
      judge_total += r.usage_judge;
      cost += r.cost_usd;
      cost_answer += r.cost_answer_only_usd;
    }
    report["totals"] = Json{{"agent", usage_to_json(agent_total)},
                            {"judge", usage_to_json(judge_total)},
                            {"cost_usd", cost},
                            {"cost_answer_only_usd", cost_answer}};
  }

  Json pareto = Json::array();
  for (const auto& p : cost_report(records))
    pareto.push_back({{"condition", p.condition},
                      {"mean_cost_usd", p.mean_cost_usd},
                      {"mean_cost_answer_only_usd", p.mean_cost_answer_only_usd},
                      {"mean_score", p.mean_score},
                      {"pareto", p.pareto}});
  report["pareto"] = pareto;
  return report;
}

// ---------------------------------------------------------------------------
// CSV / SVG writers

inline std::string curves_csv(const Json& report) {
  std::string csv = "protocol,condition,step,mean_normalized,std,n,mean_memory_files\n";
  std::string protocol = report.value("protocol", "");
  const Json& conditions = report.value("conditions", Json::object());
  for (auto it = conditions.begin(); it != conditions.end(); ++it) {
    const Json& curve = it.value().value("curve", Json::array());
    const Json& growth = it.value().value("memory_growth", Json::array());
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const Json& point = curve[i];
      csv += protocol + "," + it.key() + "," + std::to_string(point.value("step", 0)) + "," +
             fmt_double(point.value("mean", 0.0)) + "," + fmt_double(point.value("std", 0.0)) +
             "," + std::to_string(point.value("n", 0)) + "," +
             (i < growth.size() ? fmt_double(growth[i].get<double>()) : "0") + "\n";
    }
  }
  return csv;
}

inline std::string pareto_csv(const std::vector<CostPoint>& points) {
  std::string csv = "condition,mean_cost_usd,mean_cost_answer_only_usd,mean_score,pareto\n";
  for (const auto& p : points)
    csv += p.condition + "," + fmt_double(p.mean_cost_usd) + "," +
           fmt_double(p.mean_cost_answer_only_usd) + "," + fmt_double(p.mean_score) + "," +
           (p.pareto ? "true" : "false") + "\n";
  return csv;
}

// Minimal self-contained scatter plot; no plotting dependency.
inline std::string pareto_svg(const std::vector<CostPoint>& points) {
  const double width = 640, height = 440, margin = 70;
  double max_cost = 1e-9;
  for (const auto& p : points) max_cost = std::max(max_cost, p.mean_cost_usd);
  max_cost *= 1.15;

  auto x_of = [&](double cost) {
    return margin + (width - 2 * margin) * (cost / max_cost);
  };
  auto y_of = [&](double score) {
    return height - margin - (height - 2 * margin) * score;
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"440\" "
      "viewBox=\"0 0 640 440\">\n"
      "<rect width=\"640\" height=\"440\" fill=\"white\"/>\n";
  svg += "<line x1=\"" + num(margin) + "\" y1=\"" + num(height - margin) + "\" x2=\"" +
         num(width - margin) + "\" y2=\"" + num(height - margin) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(margin) + "\" y1=\"" + num(margin) + "\" x2=\"" + num(margin) +
         "\" y2=\"" + num(height - margin) + "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + num(width / 2) + "\" y=\"" + num(height - 20) +
         "\" text-anchor=\"middle\" font-size=\"14\">mean cost per task (USD)</text>\n";
  svg += "<text x=\"20\" y=\"" + num(height / 2) +
         "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 20 " +
         num(height / 2) + ")\">mean normalized score</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    double score = tick / 4.0;
    svg += "<text x=\"" + num(margin - 8) + "\" y=\"" + num(y_of(score) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + num(score) + "</text>\n";
    double cost = max_cost * tick / 4.0;
    svg += "<text x=\"" + num(x_of(cost)) + "\" y=\"" + num(height - margin + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + num(cost) + "</text>\n";
  }
  for (const auto& p : points) {
    std::string colour = p.pareto ? "#d62728" : "#7f7f7f";
    svg += "<circle cx=\"" + num(x_of(p.mean_cost_usd)) + "\" cy=\"" + num(y_of(p.mean_score)) +
           "\" r=\"6\" fill=\"" + colour + "\"/>\n";
    svg += "<text x=\"" + num(x_of(p.mean_cost_usd) + 10) + "\" y=\"" +
           num(y_of(p.mean_score) + 4) + "\" font-size=\"12\">" + p.condition +
           (p.pareto ? " (pareto)" : "") + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline Status write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return make_error(Errc::io_error, "cannot write " + path.string());
  out << text;
  return out.good() ? ok_status() : Status(make_error(Errc::io_error, "short write"));
}

// Canonical run outputs under output_dir.
inline Status write_outputs(const std::vector<EpisodeRecord>& records, const Json& report,
                            const std::filesystem::path& output_dir) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) return make_error(Errc::io_error, "cannot create " + output_dir.string());
  if (auto st = write_records_jsonl(records, output_dir / "records.jsonl"); !st.ok()) return st;
  if (auto st = write_text(output_dir / "report.json", report.dump(2) + "\n"); !st.ok())
    return st;
  if (auto st = write_text(output_dir / "curves.csv", curves_csv(report)); !st.ok()) return st;
  auto points = cost_report(records);
  if (auto st = write_text(output_dir / "pareto.csv", pareto_csv(points)); !st.ok()) return st;
  if (auto st = write_text(output_dir / "pareto.svg", pareto_svg(points)); !st.ok()) return st;
  return ok_status();
}

// ---------------------------------------------------------------------------
// Backend / judge factories

inline Result<std::unique_ptr<Backend>> make_backend(const BackendConfig& cfg) {
  if (cfg.kind == BackendKind::replay) {
    if (cfg.replay_path.empty())
      return make_error(Errc::config_error, "replay backend requires replay_path");
    auto replay = ReplayBackend::open(cfg);
    if (!replay.ok()) return replay.error();
    return std::unique_ptr<Backend>(replay.take().release());
  }
  if (cfg.endpoint.empty() || cfg.model_name.empty())
    return make_error(Errc::config_error, "wire backend requires endpoint and model_name");
  return std::unique_ptr<Backend>(new WireBackend(cfg));
}

inline Result<std::unique_ptr<Judge>> make_judge(JudgeKind kind, const BackendConfig& cfg,
                                                 std::vector<std::unique_ptr<Backend>>& keep) {
  if (kind == JudgeKind::oracle) return std::unique_ptr<Judge>(new eval::OracleJudge());
  auto backend = make_backend(cfg);
  if (!backend.ok()) return backend.error();
  keep.push_back(backend.take());
  return std::unique_ptr<Judge>(new eval::LlmJudge(*keep.back()));
}

// ---------------------------------------------------------------------------
// The runner

struct RunResult {
  std::vector<EpisodeRecord> records;
  Json report;
};

class Runner {
 public:
  Runner(const RunConfig& cfg, const BenchmarkSet& set, Backend& agent_backend, Judge& judge)
      : cfg_(cfg), set_(set), backend_(agent_backend), judge_(judge) {}

  Result<RunResult> run() {
    if (auto st = check_prices(); !st.ok()) return st.error();
    records_.clear();

    for (std::uint64_t seed : cfg_.seeds) {
      if (cfg_.protocol == Protocol::continual) {
        for (const auto& category : selected_categories()) {
          auto seq = bench::sample_sequence(set_, bench::SequenceMode::per_category,
                                            cfg_.horizon, category, seed, cfg_.anti_adjacent);
          if (!seq.ok()) return seq.error();
          for (Condition condition : cfg_.conditions) {
            auto cell = cell_id(category, condition, seed);
            if (auto st = run_cell(seq.value(), condition, cell, seed); !st.ok())
              return st.error();
          }
        }
      } else {
        auto seq = bench::sample_sequence(set_, bench::SequenceMode::interleaved, cfg_.horizon,
                                          std::nullopt, seed, cfg_.anti_adjacent);
        if (!seq.ok()) return seq.error();
        for (Condition condition : cfg_.conditions) {
          auto cell = cell_id("all", condition, seed);
          if (auto st = run_cell(seq.value(), condition, cell, seed); !st.ok())
            return st.error();
        }
      }
    }

    RunResult result;
    result.records = records_;
    result.report = build_report(records_);
    if (!cfg_.output_dir.empty()) {
      if (auto st = write_outputs(result.records, result.report, cfg_.output_dir); !st.ok())
        return st.error();
    }
    return result;
  }

 private:
  std::vector<std::string> selected_categories() const {
    if (!cfg_.categories.empty()) return cfg_.categories;
    return set_.categories();
  }

  std::string cell_id(const std::string& category, Condition condition,
                      std::uint64_t seed) const {
    return std::string(protocol_name(cfg_.protocol)) + "_" + category + "_" +
           agent::condition_name(condition) + "_s" + std::to_string(seed);
  }

  Status check_prices() {
    if (cfg_.price_table.empty()) return ok_status();  // cost accounting disabled
    auto agent_model = backend_.model_name();
    if (auto p = price_for(cfg_.price_table, agent_model); !p.ok()) return p.error();
    if (cfg_.judge_kind == JudgeKind::llm) {
      if (auto p = price_for(cfg_.price_table, cfg_.judge_backend.model_name); !p.ok())
        return p.error();
    }
    return ok_status();
  }

  bool deterministic_clock() const {
    return cfg_.deterministic_clock.value_or(cfg_.agent.backend.kind == BackendKind::replay);
  }

  memory::MemoryRoot make_root(const std::filesystem::path& dir) const {
    Clock clock = deterministic_clock()
                      ? make_fixed_step_clock(*parse_iso8601("2026-01-01T00:00:00Z"))
                      : Clock(system_now);
    return memory::MemoryRoot{dir, dir.filename().string(), clock};
  }

  double episode_cost(const EpisodeRecord& r, bool answer_only) const {
    if (cfg_.price_table.empty()) return 0.0;
    auto agent_price = price_for(cfg_.price_table, r.agent_model);
    if (!agent_price.ok()) return 0.0;
    double cost = usage_cost(r.usage_agent_answer, agent_price.value());
    if (answer_only) return cost;
    cost += usage_cost(r.usage_agent_feedback, agent_price.value());
    if (cfg_.judge_kind == JudgeKind::llm) {
      auto judge_price = price_for(cfg_.price_table, cfg_.judge_backend.model_name);
      if (judge_price.ok()) cost += usage_cost(r.usage_judge, judge_price.value());
    }
    return cost;
  }

  Status run_cell(const bench::TaskSequence& seq, Condition condition,
                  const std::string& cell, std::uint64_t seed) {
    std::filesystem::path roots_dir =
        std::filesystem::path(cfg_.output_dir.empty() ? "." : cfg_.output_dir) / "roots" / cell;
    memory::MemoryRoot shared_root = make_root(roots_dir);

    for (std::size_t i = 0; i < seq.tasks.size(); ++i) {
      const bench::Scenario& scenario = seq.tasks[i];
      const bench::Rubric* rubric = set_.find_rubric(scenario.rubric_id);
      if (!rubric)
        return make_error(Errc::schema_error, "missing rubric " + scenario.rubric_id);

      // zero_shot and self_critique get a fresh scratch root per step;
      // memory_feedback threads one root through the cell.
      memory::MemoryRoot root =
          condition == Condition::memory_feedback
              ? shared_root
              : make_root(roots_dir / ("step" + std::to_string(i + 1)));

      EpisodeRecord rec;
      rec.run_id = cell;
      rec.protocol = protocol_name(cfg_.protocol);
      rec.condition = agent::condition_name(condition);
      rec.step_index = static_cast<int>(i + 1);
      rec.seed = seed;
      rec.scenario_id = scenario.scenario_id;
      rec.category = scenario.category;
      rec.agent_model = backend_.model_name();
      rec.judge_name = judge_.name();

      agent::Transcript transcript;
      auto outcome = agent::run_task(scenario, *rubric, condition, root, cfg_.agent, backend_);
      if (!outcome.ok()) {
        rec.failed = true;
        rec.error = outcome.error().to_string();
      } else {
        transcript = outcome.value().transcript;
        rec.final_text = outcome.value().final_text;
        rec.usage_agent_answer = transcript.usage_total;
        rec.generation_calls_answer = outcome.value().generation_calls;
        rec.tool_iterations_answer = outcome.value().tool_iterations;
        rec.retrieved = outcome.value().retrieved;

        auto verdict = judge_.evaluate(*rubric, rec.final_text);
        if (!verdict.ok()) {
          rec.failed = true;
          rec.error = verdict.error().to_string();
        } else {
          rec.has_verdict = true;
          rec.critique = verdict.value().critique;
          rec.raw_score = verdict.value().raw_score;
          rec.normalized = verdict.value().normalized;
          rec.clamped = verdict.value().clamped;
          rec.usage_judge = verdict.value().judge_usage;

          if (condition == Condition::memory_feedback) {
            auto fb = agent::ingest_feedback(verdict.value(), rubric->scale, transcript, root,
                                             cfg_.agent, backend_);
            if (!fb.ok()) {
              rec.failed = true;
              rec.error = fb.error().to_string();
            } else {
              rec.usage_agent_feedback = fb.value().usage;
              rec.generation_calls_feedback = fb.value().generation_calls;
            }
          }
        }
      }

      auto listing = memory::list_files(root, "/memories/");
      rec.memory_file_count_after =
          listing.ok() ? static_cast<std::int64_t>(listing.value().entries.size()) : 0;
      rec.cost_usd = episode_cost(rec, false);
      rec.cost_answer_only_usd = episode_cost(rec, true);

      if (!cfg_.output_dir.empty()) {
        auto path = std::filesystem::path(cfg_.output_dir) / "transcripts" /
                    (cell + "_step" + std::to_string(i + 1) + ".jsonl");
        std::string lines;
        for (const auto& m : transcript.messages) lines += message_to_json(m).dump() + "\n";
        (void)write_text(path, lines);
      }
      records_.push_back(std::move(rec));
    }
    return ok_status();
  }

  const RunConfig& cfg_;
  const BenchmarkSet& set_;
  Backend& backend_;
  Judge& judge_;
  std::vector<EpisodeRecord> records_;
};

inline Result<RunResult> run_protocol(const RunConfig& cfg, const BenchmarkSet& set,
                                      Backend& agent_backend, Judge& judge) {
  return Runner(cfg, set, agent_backend, judge).run();
}

inline Result<RunResult> run_continual(const RunConfig& cfg, const BenchmarkSet& set,
                                       Backend& agent_backend, Judge& judge) {
  RunConfig c = cfg;
  c.protocol = Protocol::continual;
  return run_protocol(c, set, agent_backend, judge);
}

inline Result<RunResult> run_mixed(const RunConfig& cfg, const BenchmarkSet& set,
                                   Backend& agent_backend, Judge& judge) {
  RunConfig c = cfg;
  c.protocol = Protocol::mixed;
  return run_protocol(c, set, agent_backend, judge);
}

}  // namespace feedmem::harness
