#pragma once

/**
 * report.hpp - run outputs: per-prompt and aggregate CSV, a full JSON
 * report, and self-contained SVG plots.
 *
 * Emission is deterministic: doubles print with %.17g, rows keep run
 * order, and nothing stamps wall-clock time, so identical runs produce
 * byte-identical files. NaN cells are empty in CSV and null in JSON.
 */

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "declab/common.hpp"
#include "declab/experiment.hpp"

namespace declab::harness {

// ============================================================
// Filesystem plumbing
// ============================================================

/** Create `dir` and prove it is writable before any work starts. */
inline void ensure_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("output: cannot create '" + dir.string() + "': " + ec.message());
  const std::filesystem::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw InputError("output: directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output: cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw InputError("output: write to '" + path.string() + "' failed");
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/** NaN and the infinities become the empty CSV cell. */
inline std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : ""; }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline nlohmann::json json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

// ============================================================
// CSV
// ============================================================

inline std::string per_prompt_csv(const std::vector<PromptRow>& rows) {
  std::string out = "prompt_id,decoder";
  for (const auto& [name, member] : numeric_columns()) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (const auto& row : rows) {
    out += detail::csv_field(row.prompt_id);
    out += ',';
    out += detail::csv_field(row.decoder);
    for (const auto& [name, member] : numeric_columns()) {
      out += ',';
      out += detail::csv_number(row.*member);
    }
    out += '\n';
  }
  return out;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& aggregates) {
  std::string out = "decoder,metric,mean,std,count\n";
  for (const auto& a : aggregates) {
    out += detail::csv_field(a.decoder);
    out += ',';
    out += detail::csv_field(a.metric);
    out += ',';
    out += detail::csv_number(a.mean);
    out += ',';
    out += detail::csv_number(a.stddev);
    out += ',';
    out += std::to_string(a.count);
    out += '\n';
  }
  return out;
}

// ============================================================
// JSON
// ============================================================

inline nlohmann::json report_to_json(const MetricReport& report) {
  nlohmann::json doc;
  doc["config"] = report.config_echo;

  doc["per_prompt"] = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["prompt_id"] = row.prompt_id;
    r["decoder"] = row.decoder;
    for (const auto& [name, member] : numeric_columns())
      r[name] = detail::json_number(row.*member);
    doc["per_prompt"].push_back(std::move(r));
  }

  doc["aggregates"] = nlohmann::json::array();
  for (const auto& a : report.aggregates)
    doc["aggregates"].push_back({{"decoder", a.decoder},
                                 {"metric", a.metric},
                                 {"mean", detail::json_number(a.mean)},
                                 {"std", detail::json_number(a.stddev)},
                                 {"count", a.count}});

  doc["samples"] = nlohmann::json::array();
  for (const auto& slot : report.samples) {
    nlohmann::json s;
    s["prompt_id"] = slot.prompt_id;
    s["decoder"] = slot.decoder;
    s["selected"] = slot.selected;
    s["samples"] = nlohmann::json::array();
    for (const auto& d : slot.samples) {
      nlohmann::json e;
      e["text"] = d.text;
      e["tokens"] = d.tokens;
      e["log_prob"] = detail::json_number(d.log_prob);
      e["confidence"] = detail::json_number(d.confidence);
      e["score"] = detail::json_number(d.score);
      e["stop_reason"] = d.stop_reason;
      e["branch_index"] =
          d.branch_index ? nlohmann::json(*d.branch_index) : nlohmann::json(nullptr);
      s["samples"].push_back(std::move(e));
    }
    doc["samples"].push_back(std::move(s));
  }

  doc["failures"] = report.failures;

  if (report.pass_at_k) {
    nlohmann::json pk;
    pk["k"] = report.pass_at_k->k;
    pk["mean"] = detail::json_number(report.pass_at_k->mean);
    pk["problems"] = nlohmann::json::array();
    for (const auto& p : report.pass_at_k->problems)
      pk["problems"].push_back({{"problem_id", p.problem_id},
                                {"n", p.n},
                                {"c", p.c},
                                {"value", detail::json_number(p.value)}});
    doc["pass_at_k"] = std::move(pk);
  } else {
    doc["pass_at_k"] = nullptr;
  }
  return doc;
}

// ============================================================
// SVG plots
// ============================================================

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

inline std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/** Fixed per-decoder palette so colors are stable across runs. */
inline const char* decoder_color(const std::string& decoder) {
  if (decoder == "greedy") return "#4c78a8";
  if (decoder == "baseline") return "#f58518";
  if (decoder == "speculative") return "#54a24b";
  if (decoder == "cot") return "#b279a2";
  return "#9d9d9d";
}

struct SvgCanvas {
  double width, height;
  std::string body;

  SvgCanvas(double w, double h) : width(w), height(h) {}

  void rect(double x, double y, double w, double h, const std::string& fill) {
    body += "  <rect x=\"" + coord(x) + "\" y=\"" + coord(y) + "\" width=\"" + coord(w) +
            "\" height=\"" + coord(h) + "\" fill=\"" + fill + "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            const std::string& extra = "") {
    body += "  <line x1=\"" + coord(x1) + "\" y1=\"" + coord(y1) + "\" x2=\"" + coord(x2) +
            "\" y2=\"" + coord(y2) + "\" stroke=\"" + stroke + "\"" + extra + "/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 11,
            const std::string& anchor = "start", const std::string& fill = "#333333") {
    body += "  <text x=\"" + coord(x) + "\" y=\"" + coord(y) + "\" font-size=\"" +
            std::to_string(size) + "\" font-family=\"sans-serif\" text-anchor=\"" + anchor +
            "\" fill=\"" + fill + "\">" + svg_escape(s) + "</text>\n";
  }

  std::string finish() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + coord(width) + "\" height=\"" +
           coord(height) + "\" viewBox=\"0 0 " + coord(width) + " " + coord(height) + "\">\n" +
           "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body + "</svg>\n";
  }
};

inline std::optional<double> find_aggregate(const std::vector<AggregateRow>& aggregates,
                                            const std::string& decoder,
                                            const std::string& metric) {
  for (const auto& a : aggregates)
    if (a.decoder == decoder && a.metric == metric) return a.mean;
  return std::nullopt;
}

}  // namespace detail

/** Grouped histogram of per-prompt semantic entropy, one color per decoder. */
inline std::string entropy_histogram_svg(const std::vector<PromptRow>& rows,
                                         const std::vector<std::string>& decoders) {
  std::map<std::string, std::vector<double>> values;
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& row : rows) {
    if (!std::isfinite(row.semantic_entropy)) continue;
    values[row.decoder].push_back(row.semantic_entropy);
    lo = any ? std::min(lo, row.semantic_entropy) : row.semantic_entropy;
    hi = any ? std::max(hi, row.semantic_entropy) : row.semantic_entropy;
    any = true;
  }

  detail::SvgCanvas svg(640, 360);
  const double left = 56, right = 616, top = 44, bottom = 312;
  svg.text(320, 24, "Semantic entropy per prompt", 14, "middle");
  svg.line(left, bottom, right, bottom, "#333333");
  svg.line(left, top, left, bottom, "#333333");
  svg.text(320, 348, "semantic entropy (nats)", 11, "middle");
  if (!any) {
    svg.text(320, 180, "no finite entropy values", 12, "middle", "#888888");
    return svg.finish();
  }
  if (hi <= lo) hi = lo + 1.0;

  const std::size_t bins = 10;
  std::map<std::string, std::vector<std::size_t>> hist;
  std::size_t max_count = 1;
  for (const auto& decoder : decoders) {
    auto it = values.find(decoder);
    if (it == values.end()) continue;
    auto& h = hist[decoder];
    h.assign(bins, 0);
    for (double v : it->second) {
      auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
      if (b >= bins) b = bins - 1;
      ++h[b];
      max_count = std::max(max_count, h[b]);
    }
  }

  const double bin_w = (right - left) / static_cast<double>(bins);
  const double group_w = bin_w * 0.86;
  const double bar_w = hist.empty() ? group_w : group_w / static_cast<double>(hist.size());
  std::size_t series = 0;
  for (const auto& decoder : decoders) {
    auto it = hist.find(decoder);
    if (it == hist.end()) continue;
    for (std::size_t b = 0; b < bins; ++b) {
      if (it->second[b] == 0) continue;
      const double h =
          (bottom - top) * static_cast<double>(it->second[b]) / static_cast<double>(max_count);
      const double x = left + static_cast<double>(b) * bin_w + bin_w * 0.07 +
                       static_cast<double>(series) * bar_w;
      svg.rect(x, bottom - h, bar_w, h, detail::decoder_color(decoder));
    }
    svg.text(left + 8 + static_cast<double>(series) * 120, 40,
             decoder, 11, "start", detail::decoder_color(decoder));
    ++series;
  }

  for (std::size_t b = 0; b <= bins; b += 2) {
    const double x = left + static_cast<double>(b) * bin_w;
    const double v = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    svg.text(x, bottom + 16, buf, 10, "middle", "#555555");
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%zu", max_count);
  svg.text(left - 6, top + 4, buf, 10, "end", "#555555");
  svg.text(left - 6, bottom + 4, "0", 10, "end", "#555555");
  return svg.finish();
}

/** Mean cluster count and mean cluster size per decoder, paired bars. */
inline std::string cluster_sizes_svg(const std::vector<AggregateRow>& aggregates,
                                     const std::vector<std::string>& decoders) {
  detail::SvgCanvas svg(640, 360);
  const double left = 56, right = 616, top = 44, bottom = 312;
  svg.text(320, 24, "Semantic clusters per prompt", 14, "middle");
  svg.line(left, bottom, right, bottom, "#333333");
  svg.line(left, top, left, bottom, "#333333");
  svg.text(96, 40, "mean clusters", 11, "start", "#4c78a8");
  svg.text(196, 40, "mean cluster size", 11, "start", "#f58518");

  double max_v = 1.0;
  struct Entry {
    std::string decoder;
    double clusters, size;
  };
  std::vector<Entry> entries;
  for (const auto& decoder : decoders) {
    auto c = detail::find_aggregate(aggregates, decoder, "num_clusters");
    auto s = detail::find_aggregate(aggregates, decoder, "mean_cluster_size");
    if (!c && !s) continue;
    entries.push_back({decoder, c.value_or(0.0), s.value_or(0.0)});
    max_v = std::max({max_v, entries.back().clusters, entries.back().size});
  }
  if (entries.empty()) {
    svg.text(320, 180, "no clustering data", 12, "middle", "#888888");
    return svg.finish();
  }

  const double slot_w = (right - left) / static_cast<double>(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double x0 = left + static_cast<double>(i) * slot_w;
    const double bar_w = slot_w * 0.28;
    const double h1 = (bottom - top) * entries[i].clusters / max_v;
    const double h2 = (bottom - top) * entries[i].size / max_v;
    svg.rect(x0 + slot_w * 0.18, bottom - h1, bar_w, h1, "#4c78a8");
    svg.rect(x0 + slot_w * 0.54, bottom - h2, bar_w, h2, "#f58518");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", entries[i].clusters);
    svg.text(x0 + slot_w * 0.18 + bar_w / 2, bottom - h1 - 4, buf, 10, "middle");
    std::snprintf(buf, sizeof buf, "%.2f", entries[i].size);
    svg.text(x0 + slot_w * 0.54 + bar_w / 2, bottom - h2 - 4, buf, 10, "middle");
    svg.text(x0 + slot_w / 2, bottom + 16, entries[i].decoder, 11, "middle");
  }
  return svg.finish();
}

/** Per-problem pass@k bars with the mean as a dashed rule. */
inline std::string pass_at_k_svg(const PassAtKSummary& summary) {
  detail::SvgCanvas svg(640, 360);
  const double left = 56, right = 616, top = 44, bottom = 312;
  svg.text(320, 24, "pass@" + std::to_string(summary.k) + " by problem", 14, "middle");
  svg.line(left, bottom, right, bottom, "#333333");
  svg.line(left, top, left, bottom, "#333333");
  svg.text(left - 6, top + 4, "1.0", 10, "end", "#555555");
  svg.text(left - 6, bottom + 4, "0.0", 10, "end", "#555555");
  if (summary.problems.empty()) {
    svg.text(320, 180, "no problems qualified", 12, "middle", "#888888");
    return svg.finish();
  }

  const double slot_w = (right - left) / static_cast<double>(summary.problems.size());
  for (std::size_t i = 0; i < summary.problems.size(); ++i) {
    const auto& p = summary.problems[i];
    const double h = (bottom - top) * p.value;
    svg.rect(left + static_cast<double>(i) * slot_w + slot_w * 0.15, bottom - h, slot_w * 0.7, h,
             "#54a24b");
    svg.text(left + static_cast<double>(i) * slot_w + slot_w / 2, bottom + 16, p.problem_id, 10,
             "middle");
  }
  const double mean_y = bottom - (bottom - top) * summary.mean;
  svg.line(left, mean_y, right, mean_y, "#d62728", " stroke-dasharray=\"6 4\"");
  char buf[48];
  std::snprintf(buf, sizeof buf, "mean %.3f", summary.mean);
  svg.text(right, mean_y - 6, buf, 11, "end", "#d62728");
  return svg.finish();
}

// ============================================================
// Emission
// ============================================================

/**
 * Write every run artifact under `out_dir`:
 *   per_prompt.csv, aggregate.csv, report.json,
 *   plots/entropy_histogram.svg, plots/cluster_sizes.svg,
 *   plots/pass_at_k.svg (when pass/fail data was configured).
 * Returns the written paths in order.
 */
inline std::vector<std::filesystem::path> emit_outputs(const MetricReport& report,
                                                       const std::filesystem::path& out_dir) {
  ensure_writable(out_dir);
  ensure_writable(out_dir / "plots");
  std::vector<std::filesystem::path> written;

  auto emit = [&](const std::filesystem::path& rel, const std::string& content) {
    const std::filesystem::path path = out_dir / rel;
    detail::write_text_file(path, content);
    written.push_back(path);
  };

  const std::vector<std::string> decoder_order =
      report.config_echo["decoders"].get<std::vector<std::string>>();
  emit("per_prompt.csv", per_prompt_csv(report.rows));
  emit("aggregate.csv", aggregate_csv(report.aggregates));
  emit("report.json", report_to_json(report).dump(2) + "\n");
  emit(std::filesystem::path("plots") / "entropy_histogram.svg",
       entropy_histogram_svg(report.rows, decoder_order));
  emit(std::filesystem::path("plots") / "cluster_sizes.svg",
       cluster_sizes_svg(report.aggregates, decoder_order));
  if (report.pass_at_k)
    emit(std::filesystem::path("plots") / "pass_at_k.svg", pass_at_k_svg(*report.pass_at_k));
  return written;
}

}  // namespace declab::harness
