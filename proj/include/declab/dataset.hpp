#pragma once

/**
 * dataset.hpp - line-delimited input files for the experiment harness.
 *
 * Prompt datasets are JSON lines with fields
 *   {"id": "...", "prompt": "...", "context": "...", "references": [...]}
 * (context and references optional). Pass/fail files hold execution
 * outcomes for pass@k:
 *   {"problem_id": "...", "sample_id": "...", "passed": true}
 * Loaders report the offending line number on any malformed input.
 */

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "declab/common.hpp"
#include "declab/metrics.hpp"

namespace declab::harness {

// ============================================================
// Prompts
// ============================================================

struct PromptRecord {
  std::string id;
  std::string context;  // may be empty
  std::string prompt;
  std::vector<std::string> references;  // may be empty
};

inline std::vector<PromptRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("dataset: cannot open '" + path.string() + "'");
  std::vector<PromptRecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw InputError("dataset: " + path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) fail("line is not a JSON object");
    if (!doc.contains("id") || !doc["id"].is_string()) fail("missing string field 'id'");
    if (!doc.contains("prompt") || !doc["prompt"].is_string() ||
        doc["prompt"].get<std::string>().empty())
      fail("missing non-empty string field 'prompt'");
    PromptRecord rec;
    rec.id = doc["id"].get<std::string>();
    if (!ids.insert(rec.id).second) fail("duplicate prompt id '" + rec.id + "'");
    rec.prompt = doc["prompt"].get<std::string>();
    if (doc.contains("context")) {
      if (!doc["context"].is_string()) fail("field 'context' must be a string");
      rec.context = doc["context"].get<std::string>();
    }
    if (doc.contains("references")) {
      if (!doc["references"].is_array()) fail("field 'references' must be an array of strings");
      for (const auto& r : doc["references"]) {
        if (!r.is_string()) fail("field 'references' must be an array of strings");
        rec.references.push_back(r.get<std::string>());
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// ============================================================
// Pass/fail outcomes
// ============================================================

struct PassFailRecord {
  std::string problem_id;
  std::string sample_id;
  bool passed = false;
};

inline std::vector<PassFailRecord> load_pass_fail(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("pass/fail: cannot open '" + path.string() + "'");
  std::vector<PassFailRecord> out;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw InputError("pass/fail: " + path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) fail("line is not a JSON object");
    for (const char* field : {"problem_id", "sample_id"})
      if (!doc.contains(field) || !doc[field].is_string())
        fail(std::string("missing string field '") + field + "'");
    if (!doc.contains("passed") || !doc["passed"].is_boolean())
      fail("missing boolean field 'passed'");
    out.push_back({doc["problem_id"].get<std::string>(), doc["sample_id"].get<std::string>(),
                   doc["passed"].get<bool>()});
  }
  return out;
}

/** Per-problem pass@k plus the dataset mean. */
struct PassAtKSummary {
  struct Problem {
    std::string problem_id;
    int n = 0;
    int c = 0;
    double value = 0.0;
  };
  int k = 0;
  std::vector<Problem> problems;
  double mean = 0.0;
};

/** Problems with fewer than k samples are skipped (pass@k is undefined there). */
inline PassAtKSummary compute_pass_at_k(const std::vector<PassFailRecord>& records, int k) {
  if (k < 1) throw ParameterError("pass@k: k must be >= 1");
  std::map<std::string, std::pair<int, int>> tally;  // problem -> (n, c)
  for (const auto& r : records) {
    auto& t = tally[r.problem_id];
    ++t.first;
    if (r.passed) ++t.second;
  }
  PassAtKSummary out;
  out.k = k;
  double acc = 0.0;
  for (const auto& [id, nc] : tally) {
    if (nc.first < k) continue;
    PassAtKSummary::Problem p{id, nc.first, nc.second, eval::pass_at_k(nc.first, nc.second, k)};
    acc += p.value;
    out.problems.push_back(std::move(p));
  }
  if (!out.problems.empty()) out.mean = acc / static_cast<double>(out.problems.size());
  return out;
}

}  // namespace declab::harness
