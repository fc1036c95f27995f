#pragma once

// Rubric-scored scenario sets: schema, validation, loading, serialization
// and deterministic task-sequence sampling for the two run protocols.
//
// On disk a benchmark is either a manifest ({"categories":[<file>, ...]})
// pointing at one JSON document per category, or a single inline document
// ({"categories":[{...}, ...]}). Each category document carries its
// rubrics and scenarios.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "feedmem/chat.hpp"

namespace feedmem::bench {

enum class Scale { writing_0_10, behavioral_1_5, ethical_minus3_plus3 };
enum class EthicalPole { consequentialism, deontology };

inline const char* scale_name(Scale s) {
  switch (s) {
    case Scale::writing_0_10: return "writing_0_10";
    case Scale::behavioral_1_5: return "behavioral_1_5";
    case Scale::ethical_minus3_plus3: return "ethical_minus3_plus3";
  }
  return "writing_0_10";
}

inline std::optional<Scale> parse_scale(std::string_view s) {
  if (s == "writing_0_10") return Scale::writing_0_10;
  if (s == "behavioral_1_5") return Scale::behavioral_1_5;
  if (s == "ethical_minus3_plus3") return Scale::ethical_minus3_plus3;
  return std::nullopt;
}

inline const char* pole_name(EthicalPole p) {
  return p == EthicalPole::consequentialism ? "consequentialism" : "deontology";
}

inline std::optional<EthicalPole> parse_pole(std::string_view s) {
  if (s == "consequentialism") return EthicalPole::consequentialism;
  if (s == "deontology") return EthicalPole::deontology;
  return std::nullopt;
}

struct PerformanceLevel {
  std::string label;       // e.g. "Excellent"
  std::string descriptor;  // expected behaviors at this level
};

struct RubricDimension {
  std::string name;
  double weight = 0.0;                  // fraction in (0,1]; weights sum to 1
  std::vector<std::string> checklist;   // oracle-judge keywords (optional)
  std::vector<PerformanceLevel> levels;
};

struct Rubric {
  std::string rubric_id;
  std::string category;
  Scale scale = Scale::writing_0_10;
  std::optional<EthicalPole> target_pole;  // ethical scale only
  std::vector<RubricDimension> dimensions;
  std::string full_text;  // the prose shown to the judge (never to the agent)
};

struct Scenario {
  std::string scenario_id;
  std::string category;
  std::string prompt;
  std::string rubric_id;
};

struct ValidationIssue {
  std::string where;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  Json to_json() const {
    auto issues = [](const std::vector<ValidationIssue>& v) {
      Json arr = Json::array();
      for (const auto& i : v) arr.push_back({{"where", i.where}, {"message", i.message}});
      return arr;
    };
    return Json{{"errors", issues(errors)}, {"warnings", issues(warnings)}};
  }
};

class BenchmarkSet {
 public:
  std::vector<Rubric> rubrics;
  std::vector<Scenario> scenarios;  // dataset order is meaningful

  const Rubric* find_rubric(const std::string& rubric_id) const {
    for (const auto& r : rubrics)
      if (r.rubric_id == rubric_id) return &r;
    return nullptr;
  }

  const Scenario* find_scenario(const std::string& scenario_id) const {
    for (const auto& s : scenarios)
      if (s.scenario_id == scenario_id) return &s;
    return nullptr;
  }

  std::vector<std::string> categories() const {
    std::set<std::string> cats;
    for (const auto& s : scenarios) cats.insert(s.category);
    return {cats.begin(), cats.end()};  // sorted
  }

  std::vector<const Scenario*> scenarios_in(const std::string& category) const {
    std::vector<const Scenario*> out;
    for (const auto& s : scenarios)
      if (s.category == category) out.push_back(&s);
    return out;
  }
};

struct LoadedBenchmark {
  BenchmarkSet set;
  ValidationReport report;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

// Weights may be written as a fraction (0.25) or a percent string ("25%").
inline Result<double> parse_weight(const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s(trim(v.get<std::string>()));
    bool percent = !s.empty() && s.back() == '%';
    if (percent) s.pop_back();
    try {
      std::size_t used = 0;
      double d = std::stod(s, &used);
      if (used != s.size()) return make_error(Errc::schema_error, "bad weight: " + s);
      return percent ? d / 100.0 : d;
    } catch (...) {
      return make_error(Errc::schema_error, "bad weight: " + s);
    }
  }
  return make_error(Errc::schema_error, "weight must be a number or percent string");
}

inline Result<Rubric> parse_rubric(const Json& j, const std::string& category,
                                   ValidationReport& report) {
  if (!j.is_object()) return make_error(Errc::schema_error, "rubric must be an object");
  Rubric r;
  r.category = category;
  r.rubric_id = j.value("rubric_id", "");
  if (r.rubric_id.empty())
    return make_error(Errc::schema_error, "rubric missing rubric_id");
  const std::string where = "rubric " + r.rubric_id;

  auto scale = parse_scale(j.value("scale", ""));
  if (!scale) return make_error(Errc::schema_error, where + ": unknown scale");
  r.scale = *scale;

  if (j.contains("target_pole") && !j.at("target_pole").is_null()) {
    auto pole = parse_pole(j.at("target_pole").get<std::string>());
    if (!pole) return make_error(Errc::schema_error, where + ": unknown target_pole");
    r.target_pole = pole;
  }
  if (r.scale == Scale::ethical_minus3_plus3 && !r.target_pole)
    return make_error(Errc::schema_error, where + ": ethical scale requires target_pole");
  if (r.scale != Scale::ethical_minus3_plus3 && r.target_pole)
    return make_error(Errc::schema_error, where + ": target_pole only valid on ethical scale");

  r.full_text = j.value("full_text", "");

  double weight_sum = 0.0;
  for (const auto& dj : j.value("dimensions", Json::array())) {
    RubricDimension d;
    d.name = dj.value("name", "");
    if (d.name.empty()) return make_error(Errc::schema_error, where + ": dimension missing name");
    auto w = parse_weight(dj.value("weight", Json()));
    if (!w.ok()) return make_error(Errc::schema_error, where + "/" + d.name + ": " + w.error().message);
    d.weight = w.value();
    if (d.weight <= 0.0 || d.weight > 1.0)
      return make_error(Errc::schema_error, where + "/" + d.name + ": weight out of (0,1]");
    weight_sum += d.weight;
    for (const auto& kw : dj.value("checklist", Json::array())) {
      if (!kw.is_string())
        return make_error(Errc::schema_error, where + "/" + d.name + ": checklist entries must be strings");
      d.checklist.push_back(kw.get<std::string>());
    }
    std::set<std::string> labels;
    for (const auto& lj : dj.value("levels", Json::array())) {
      PerformanceLevel level{lj.value("label", ""), lj.value("descriptor", "")};
      if (level.label.empty())
        return make_error(Errc::schema_error, where + "/" + d.name + ": level missing label");
      if (level.descriptor.empty())
        return make_error(Errc::schema_error,
                          where + "/" + d.name + "/" + level.label + ": empty descriptor");
      if (!labels.insert(level.label).second)
        return make_error(Errc::schema_error,
                          where + "/" + d.name + ": duplicate level label " + level.label);
      d.levels.push_back(std::move(level));
    }
    if (!d.levels.empty() && (d.levels.size() < 4 || d.levels.size() > 5))
      report.warnings.push_back({where + "/" + d.name,
                                 "levels count outside the typical 4-5 range"});
    r.dimensions.push_back(std::move(d));
  }

  if (r.dimensions.empty())
    return make_error(Errc::schema_error, where + ": rubric has no dimensions");
  if (r.dimensions.size() < 3 || r.dimensions.size() > 7)
    report.warnings.push_back({where, "dimension count outside the typical 3-7 range"});
  if (std::abs(weight_sum - 1.0) > 1e-9)
    return make_error(Errc::schema_error,
                      where + ": dimension weights sum to " + fmt_double(weight_sum) +
                          ", expected 1.0");
  return r;
}

inline Result<Unit> parse_category_doc(const Json& doc, BenchmarkSet& set,
                                       ValidationReport& report) {
  if (!doc.is_object()) return make_error(Errc::schema_error, "category doc must be an object");
  std::string category = doc.value("category", "");
  if (category.empty()) return make_error(Errc::schema_error, "category doc missing category");

  for (const auto& rj : doc.value("rubrics", Json::array())) {
    auto r = parse_rubric(rj, category, report);
    if (!r.ok()) return r.error();
    set.rubrics.push_back(r.take());
  }
  for (const auto& sj : doc.value("scenarios", Json::array())) {
    Scenario s;
    s.category = category;
    s.scenario_id = sj.value("scenario_id", "");
    s.prompt = sj.value("prompt", "");
    s.rubric_id = sj.value("rubric_id", "");
    if (s.scenario_id.empty())
      return make_error(Errc::schema_error, "scenario missing scenario_id in " + category);
    if (s.prompt.empty())
      return make_error(Errc::schema_error, "scenario " + s.scenario_id + " has empty prompt");
    if (s.rubric_id.empty())
      return make_error(Errc::schema_error, "scenario " + s.scenario_id + " missing rubric_id");
    set.scenarios.push_back(std::move(s));
  }
  return Unit{};
}

inline Status cross_validate(const BenchmarkSet& set) {
  std::set<std::string> rubric_ids, scenario_ids;
  for (const auto& r : set.rubrics)
    if (!rubric_ids.insert(r.rubric_id).second)
      return make_error(Errc::schema_error, "duplicate rubric_id " + r.rubric_id);
  for (const auto& s : set.scenarios) {
    if (!scenario_ids.insert(s.scenario_id).second)
      return make_error(Errc::schema_error, "duplicate scenario_id " + s.scenario_id);
    const Rubric* r = set.find_rubric(s.rubric_id);
    if (!r)
      return make_error(Errc::schema_error,
                        "scenario " + s.scenario_id + " references missing rubric " + s.rubric_id);
    if (r->category != s.category)
      return make_error(Errc::schema_error,
                        "scenario " + s.scenario_id + " category does not match rubric " +
                            s.rubric_id);
  }
  return ok_status();
}

inline Result<std::string> slurp_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return make_error(Errc::io_error, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline Result<LoadedBenchmark> load_benchmark_from_json(const Json& root,
                                                        const std::filesystem::path& base_dir) {
  LoadedBenchmark out;
  if (!root.is_object() || !root.contains("categories") || !root.at("categories").is_array())
    return make_error(Errc::schema_error, "top level must carry a categories array");

  for (const auto& entry : root.at("categories")) {
    Json doc;
    if (entry.is_string()) {
      auto text = detail::slurp_file(base_dir / entry.get<std::string>());
      if (!text.ok()) return text.error();
      doc = Json::parse(text.value(), nullptr, false);
      if (doc.is_discarded())
        return make_error(Errc::parse_error, entry.get<std::string>() + ": invalid JSON");
    } else {
      doc = entry;
    }
    if (auto st = detail::parse_category_doc(doc, out.set, out.report); !st.ok())
      return st.error();
  }
  if (auto st = detail::cross_validate(out.set); !st.ok()) return st.error();
  return out;
}

inline Result<LoadedBenchmark> load_benchmark(const std::string& path) {
  std::filesystem::path p(path);
  auto text = detail::slurp_file(p);
  if (!text.ok()) return text.error();
  Json root = Json::parse(text.value(), nullptr, false);
  if (root.is_discarded()) return make_error(Errc::parse_error, path + ": invalid JSON");
  return load_benchmark_from_json(root, p.parent_path());
}

// Canonical single-document serialization; load(serialize(load(x))) is
// identical to load(x).
inline Json serialize_benchmark(const BenchmarkSet& set) {
  Json categories = Json::array();
  for (const auto& cat : set.categories()) {
    Json rubrics = Json::array();
    for (const auto& r : set.rubrics) {
      if (r.category != cat) continue;
      Json dims = Json::array();
      for (const auto& d : r.dimensions) {
        Json levels = Json::array();
        for (const auto& l : d.levels)
          levels.push_back({{"label", l.label}, {"descriptor", l.descriptor}});
        dims.push_back({{"name", d.name},
                        {"weight", d.weight},
                        {"checklist", d.checklist},
                        {"levels", levels}});
      }
      Json rj{{"rubric_id", r.rubric_id},
              {"scale", scale_name(r.scale)},
              {"dimensions", dims},
              {"full_text", r.full_text}};
      if (r.target_pole) rj["target_pole"] = pole_name(*r.target_pole);
      rubrics.push_back(rj);
    }
    Json scenarios = Json::array();
    for (const auto& s : set.scenarios)
      if (s.category == cat)
        scenarios.push_back({{"scenario_id", s.scenario_id},
                             {"prompt", s.prompt},
                             {"rubric_id", s.rubric_id}});
    categories.push_back({{"category", cat}, {"rubrics", rubrics}, {"scenarios", scenarios}});
  }
  return Json{{"categories", categories}};
}

// ---------------------------------------------------------------------------
// Task sequences

enum class SequenceMode { per_category, interleaved };

struct TaskSequence {
  std::vector<Scenario> tasks;
  SequenceMode mode = SequenceMode::per_category;
  std::uint64_t seed = 0;
};

namespace detail {

// Deterministic Fisher-Yates; std::shuffle is implementation-defined so it
// cannot be used for cross-platform reproducibility.
template <typename T>
void fisher_yates(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

inline bool has_adjacent_category(const std::vector<Scenario>& tasks) {
  for (std::size_t i = 1; i < tasks.size(); ++i)
    if (tasks[i].category == tasks[i - 1].category) return true;
  return false;
}

// Deterministic fallback arrangement: group by category, order groups by
// descending size (name as tie-break), then deal the flat list into even
// slots first, odd slots second. Whenever the largest category fits in
// ceil(n/2) slots this produces no adjacent repeats.
inline std::vector<Scenario> spread_arrangement(const std::vector<Scenario>& tasks) {
  std::map<std::string, std::vector<Scenario>> groups;
  for (const auto& t : tasks) groups[t.category].push_back(t);
  std::vector<const std::vector<Scenario>*> ordered;
  for (const auto& [name, group] : groups) ordered.push_back(&group);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->size() > b->size(); });

  std::vector<std::size_t> slots;
  for (std::size_t s = 0; s < tasks.size(); s += 2) slots.push_back(s);
  for (std::size_t s = 1; s < tasks.size(); s += 2) slots.push_back(s);

  std::vector<Scenario> out(tasks.size());
  std::size_t i = 0;
  for (const auto* group : ordered)
    for (const auto& item : *group) out[slots[i++]] = item;
  return out;
}

// Seeded shuffle constrained so no category occupies two consecutive slots
// when avoidable: reshuffle a bounded number of times, then fall back to the
// deterministic spread arrangement.
inline void anti_adjacent_shuffle(std::vector<Scenario>& tasks, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    fisher_yates(tasks, rng);
    if (!has_adjacent_category(tasks)) return;
  }
  auto spread = spread_arrangement(tasks);
  if (!has_adjacent_category(spread)) tasks = std::move(spread);
}

}  // namespace detail

inline Result<TaskSequence> sample_sequence(const BenchmarkSet& set, SequenceMode mode,
                                            int horizon,
                                            const std::optional<std::string>& category,
                                            std::uint64_t seed, bool anti_adjacent = true) {
  if (horizon <= 0) return make_error(Errc::insufficient_scenarios, "horizon must be positive");
  TaskSequence seq;
  seq.mode = mode;
  seq.seed = seed;

  if (mode == SequenceMode::per_category) {
    if (!category)
      return make_error(Errc::bad_arguments, "per_category mode requires a category");
    auto pool = set.scenarios_in(*category);
    if (static_cast<int>(pool.size()) < horizon)
      return make_error(Errc::insufficient_scenarios,
                        *category + " has " + std::to_string(pool.size()) +
                            " scenarios, need " + std::to_string(horizon));
    for (int i = 0; i < horizon; ++i) seq.tasks.push_back(*pool[static_cast<std::size_t>(i)]);
    return seq;
  }

  // Interleaved: allocate slots round-robin over sorted categories so every
  // category appears evenly (at least twice whenever horizon >= 2x the
  // category count), then shuffle the order.
  auto cats = set.categories();
  if (cats.size() < 2)
    return make_error(Errc::insufficient_scenarios, "interleaved mode needs >= 2 categories");
  if (static_cast<int>(set.scenarios.size()) < horizon)
    return make_error(Errc::insufficient_scenarios,
                      "need " + std::to_string(horizon) + " scenarios, have " +
                          std::to_string(set.scenarios.size()));

  std::map<std::string, std::vector<const Scenario*>> pools;
  for (const auto& c : cats) pools[c] = set.scenarios_in(c);
  std::map<std::string, std::size_t> cursor;
  int placed = 0;
  while (placed < horizon) {
    bool progressed = false;
    for (const auto& c : cats) {
      if (placed >= horizon) break;
      auto& pos = cursor[c];
      if (pos >= pools[c].size()) continue;
      seq.tasks.push_back(*pools[c][pos]);
      ++pos;
      ++placed;
      progressed = true;
    }
    if (!progressed)
      return make_error(Errc::insufficient_scenarios, "scenario pools exhausted");
  }

  std::mt19937_64 rng(seed);
  if (anti_adjacent)
    detail::anti_adjacent_shuffle(seq.tasks, rng);
  else
    detail::fisher_yates(seq.tasks, rng);
  return seq;
}

// ---------------------------------------------------------------------------
// External-record converter: flat JSONL records -> the category-doc schema.
// Each input line: {"scenario_id","category","prompt","rubric_id",
//                   "rubric":{...same shape as a category-doc rubric...}}
// The rubric object only needs to appear on the first record that uses it.

inline Result<Json> convert_external_records(const std::string& jsonl_text) {
  std::map<std::string, Json> docs;            // category -> doc
  std::set<std::string> seen_rubrics;
  std::istringstream in(jsonl_text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    Json rec = Json::parse(line, nullptr, false);
    if (rec.is_discarded())
      return make_error(Errc::parse_error, "line " + std::to_string(lineno) + ": invalid JSON");
    std::string category = rec.value("category", "");
    if (category.empty())
      return make_error(Errc::schema_error, "line " + std::to_string(lineno) + ": missing category");
    auto& doc = docs[category];
    if (doc.is_null())
      doc = Json{{"category", category}, {"rubrics", Json::array()}, {"scenarios", Json::array()}};

    if (rec.contains("rubric") && rec.at("rubric").is_object()) {
      Json rubric = rec.at("rubric");
      std::string rid = rubric.value("rubric_id", rec.value("rubric_id", ""));
      rubric["rubric_id"] = rid;
      if (!rid.empty() && seen_rubrics.insert(rid).second) doc["rubrics"].push_back(rubric);
    }
    doc["scenarios"].push_back({{"scenario_id", rec.value("scenario_id", "")},
                                {"prompt", rec.value("prompt", "")},
                                {"rubric_id", rec.value("rubric_id", "")}});
  }
  Json categories = Json::array();
  for (auto& [cat, doc] : docs) categories.push_back(doc);
  return Json{{"categories", categories}};
}

}  // namespace feedmem::bench
