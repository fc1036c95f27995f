// Converts externally published scenario records (flat JSONL, one record
// per line) into this repo's category-document benchmark schema.
//
// Input record fields: scenario_id, category, prompt, rubric_id, and —
// on the first record using a rubric — a "rubric" object in the same
// shape as a category-doc rubric (scale, full_text, target_pole,
// dimensions[{name, weight, checklist, levels}]).
//
//   convert_dataset --in records.jsonl --out benchmark.json

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "feedmem/benchmark.hpp"

using namespace feedmem;

int main(int argc, char** argv) {
  CLI::App app{"Convert flat JSONL scenario records into the benchmark schema"};
  std::string in_path, out_path;
  app.add_option("--in", in_path, "JSONL records file")->required();
  app.add_option("--out", out_path, "Benchmark JSON document to write")->required();
  CLI11_PARSE(app, argc, argv);

  std::ifstream in(in_path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot open " << in_path << "\n";
    return 2;
  }
  std::ostringstream ss;
  ss << in.rdbuf();

  auto converted = bench::convert_external_records(ss.str());
  if (!converted.ok()) {
    std::cerr << "conversion failed: " << converted.error().to_string() << "\n";
    return 2;
  }
  auto loaded = bench::load_benchmark_from_json(converted.value(), ".");
  if (!loaded.ok()) {
    std::cerr << "converted document fails validation: " << loaded.error().to_string() << "\n";
    return 3;
  }
  for (const auto& w : loaded.value().report.warnings)
    std::cerr << "warning: " << w.where << ": " << w.message << "\n";

  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  out << converted.value().dump(2) << "\n";
  if (!out.good()) {
    std::cerr << "cannot write " << out_path << "\n";
    return 3;
  }
  std::cout << "wrote " << out_path << " (" << loaded.value().set.scenarios.size()
            << " scenarios, " << loaded.value().set.rubrics.size() << " rubrics)\n";
  return 0;
}
