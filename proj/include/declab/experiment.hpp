#pragma once

/**
 * experiment.hpp - the experiment harness: configuration, the
 * prompt x decoder run matrix, and aggregation.
 *
 * A run is deterministic from (config, dataset, models): every sample
 * gets its seed from derive_seed(master, prompt id, decoder, index), so
 * outputs are byte-identical across repeats and worker counts. Failures
 * are recorded per prompt x decoder and never abort the run.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "declab/cluster.hpp"
#include "declab/common.hpp"
#include "declab/dataset.hpp"
#include "declab/decode.hpp"
#include "declab/entail.hpp"
#include "declab/metrics.hpp"
#include "declab/model.hpp"
#include "declab/nli.hpp"
#include "declab/record.hpp"

namespace declab::harness {

// ============================================================
// Configuration
// ============================================================

struct ModelSpec {
  std::string kind = "tabular";  // "tabular" | "ngram"
  std::string path;
  int ngram_order = 2;
  double ngram_smoothing = 1.0;
};

struct MetricToggles {
  bool exact_match = true;
  bool rouge = true;
  bool bleu = true;
  bool entailment = true;
  bool high_confidence = true;
  double high_confidence_quantile = 0.5;
};

struct PassFailSpec {
  std::string path;
  int k = 2;
};

struct ExperimentConfig {
  std::string dataset;
  ModelSpec target_model;
  std::optional<ModelSpec> draft_model;
  std::vector<std::string> decoders{"baseline", "cot"};
  decode::DecoderConfig decoder;
  std::map<std::string, nlohmann::json> decoder_overrides;  // per-decoder partial configs
  std::string oracle = "rule";  // "rule" | "remote"
  nli::NliClientConfig nli;
  std::string nli_cache = "out/nli_cache.tsv";
  semantic::PredictiveEntropyMode predictive_mode =
      semantic::PredictiveEntropyMode::McLengthNormalized;
  semantic::SemanticEntropyMode semantic_mode = semantic::SemanticEntropyMode::ClusterAssignment;
  MetricToggles metrics;
  std::optional<PassFailSpec> pass_fail;
  std::string out_dir = "out/run";
  std::uint64_t master_seed = 0;
  int workers = 1;

  void validate() const {
    if (dataset.empty()) throw ParameterError("config: dataset path is required");
    if (target_model.path.empty()) throw ParameterError("config: target_model.path is required");
    if (decoders.empty()) throw ParameterError("config: at least one decoder is required");
    for (const auto& d : decoders)
      if (d != "greedy" && d != "baseline" && d != "speculative" && d != "cot")
        throw ParameterError("config: unknown decoder '" + d + "'");
    if (std::count(decoders.begin(), decoders.end(), "speculative") > 0 && !draft_model)
      throw ParameterError("config: speculative decoding requires draft_model");
    if (oracle != "rule" && oracle != "remote")
      throw ParameterError("config: oracle must be 'rule' or 'remote'");
    if (oracle == "remote" && nli.endpoint.empty())
      throw ParameterError("config: remote oracle requires nli.endpoint");
    if (workers < 1) throw ParameterError("config: workers must be >= 1");
    if (!(metrics.high_confidence_quantile > 0.0) || metrics.high_confidence_quantile > 1.0)
      throw ParameterError("config: high_confidence_quantile must be in (0, 1]");
    decoder.validate();
    if (pass_fail && pass_fail->k < 1) throw ParameterError("config: pass_fail.k must be >= 1");
  }
};

// ------------------------------------------------------------
// JSON round trip
// ------------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> known,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw InputError("config: unknown key '" + key + "' in " + where);
  }
}

inline void decoder_config_from_json(decode::DecoderConfig& c, const nlohmann::json& j,
                                     const std::string& where) {
  reject_unknown_keys(j,
                      {"tau", "top_p", "top_k", "length_penalty", "repetition_n",
                       "repetition_penalty", "max_new_tokens", "gamma", "branching_factor",
                       "num_samples", "greedy_branches", "confidence_threshold"},
                      where);
  if (j.contains("tau")) c.tau = j["tau"].get<double>();
  if (j.contains("top_p")) c.top_p = j["top_p"].get<double>();
  if (j.contains("top_k")) {
    if (j["top_k"].is_null())
      c.top_k.reset();
    else
      c.top_k = j["top_k"].get<std::size_t>();
  }
  if (j.contains("length_penalty")) c.length_penalty = j["length_penalty"].get<double>();
  if (j.contains("repetition_n")) c.repetition_n = j["repetition_n"].get<int>();
  if (j.contains("repetition_penalty"))
    c.repetition_penalty = j["repetition_penalty"].get<double>();
  if (j.contains("max_new_tokens")) c.max_new_tokens = j["max_new_tokens"].get<std::size_t>();
  if (j.contains("gamma")) c.gamma = j["gamma"].get<int>();
  if (j.contains("branching_factor")) c.branching_factor = j["branching_factor"].get<std::size_t>();
  if (j.contains("num_samples")) c.num_samples = j["num_samples"].get<std::size_t>();
  if (j.contains("greedy_branches")) c.greedy_branches = j["greedy_branches"].get<bool>();
  if (j.contains("confidence_threshold"))
    c.confidence_threshold = j["confidence_threshold"].get<double>();
}

inline nlohmann::json decoder_config_to_json(const decode::DecoderConfig& c) {
  nlohmann::json j;
  j["tau"] = c.tau;
  j["top_p"] = c.top_p;
  j["top_k"] = c.top_k ? nlohmann::json(*c.top_k) : nlohmann::json(nullptr);
  j["length_penalty"] = c.length_penalty;
  j["repetition_n"] = c.repetition_n;
  j["repetition_penalty"] = c.repetition_penalty;
  j["max_new_tokens"] = c.max_new_tokens;
  j["gamma"] = c.gamma;
  j["branching_factor"] = c.branching_factor;
  j["num_samples"] = c.num_samples;
  j["greedy_branches"] = c.greedy_branches;
  j["confidence_threshold"] = c.confidence_threshold;
  return j;
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j, const std::string& where) {
  reject_unknown_keys(j, {"kind", "path", "order", "smoothing"}, where);
  ModelSpec spec;
  spec.kind = j.value("kind", "tabular");
  if (spec.kind != "tabular" && spec.kind != "ngram")
    throw InputError("config: " + where + ".kind must be 'tabular' or 'ngram'");
  if (!j.contains("path") || !j["path"].is_string())
    throw InputError("config: " + where + ".path is required");
  spec.path = j["path"].get<std::string>();
  if (j.contains("order")) spec.ngram_order = j["order"].get<int>();
  if (j.contains("smoothing")) spec.ngram_smoothing = j["smoothing"].get<double>();
  return spec;
}

inline nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["kind"] = spec.kind;
  j["path"] = spec.path;
  if (spec.kind == "ngram") {
    j["order"] = spec.ngram_order;
    j["smoothing"] = spec.ngram_smoothing;
  }
  return j;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InputError("config: document must be a JSON object");
  detail::reject_unknown_keys(
      doc,
      {"dataset", "target_model", "draft_model", "decoders", "decoder_config",
       "decoder_overrides", "oracle", "nli", "uncertainty", "metrics", "pass_fail", "out_dir",
       "master_seed", "workers"},
      "top level");
  ExperimentConfig c;
  if (doc.contains("dataset")) c.dataset = doc["dataset"].get<std::string>();
  if (doc.contains("target_model"))
    c.target_model = detail::model_spec_from_json(doc["target_model"], "target_model");
  if (doc.contains("draft_model") && !doc["draft_model"].is_null())
    c.draft_model = detail::model_spec_from_json(doc["draft_model"], "draft_model");
  if (doc.contains("decoders")) c.decoders = doc["decoders"].get<std::vector<std::string>>();
  if (doc.contains("decoder_config"))
    detail::decoder_config_from_json(c.decoder, doc["decoder_config"], "decoder_config");
  if (doc.contains("decoder_overrides")) {
    for (const auto& [name, obj] : doc["decoder_overrides"].items()) {
      decode::DecoderConfig probe = c.decoder;  // validates keys eagerly
      detail::decoder_config_from_json(probe, obj, "decoder_overrides." + name);
      c.decoder_overrides[name] = obj;
    }
  }
  if (doc.contains("oracle")) c.oracle = doc["oracle"].get<std::string>();
  if (doc.contains("nli")) {
    detail::reject_unknown_keys(doc["nli"],
                                {"endpoint", "cache", "service_identity", "max_attempts",
                                 "backoff_ms"},
                                "nli");
    c.nli.endpoint = doc["nli"].value("endpoint", "");
    c.nli_cache = doc["nli"].value("cache", c.nli_cache);
    c.nli.service_identity = doc["nli"].value("service_identity", c.nli.service_identity);
    c.nli.max_attempts = doc["nli"].value("max_attempts", c.nli.max_attempts);
    if (doc["nli"].contains("backoff_ms"))
      c.nli.backoff_base = std::chrono::milliseconds(doc["nli"]["backoff_ms"].get<int>());
  }
  if (doc.contains("uncertainty")) {
    detail::reject_unknown_keys(doc["uncertainty"],
                                {"predictive_entropy_mode", "semantic_entropy_mode"},
                                "uncertainty");
    const std::string pe = doc["uncertainty"].value("predictive_entropy_mode",
                                                    "mc-length-normalized");
    if (pe == "mc-length-normalized")
      c.predictive_mode = semantic::PredictiveEntropyMode::McLengthNormalized;
    else if (pe == "renormalized-discrete")
      c.predictive_mode = semantic::PredictiveEntropyMode::RenormalizedDiscrete;
    else
      throw InputError("config: unknown predictive_entropy_mode '" + pe + "'");
    const std::string se =
        doc["uncertainty"].value("semantic_entropy_mode", "cluster-assignment");
    if (se == "cluster-assignment")
      c.semantic_mode = semantic::SemanticEntropyMode::ClusterAssignment;
    else if (se == "probability-weighted")
      c.semantic_mode = semantic::SemanticEntropyMode::ProbabilityWeighted;
    else
      throw InputError("config: unknown semantic_entropy_mode '" + se + "'");
  }
  if (doc.contains("metrics")) {
    detail::reject_unknown_keys(doc["metrics"],
                                {"exact_match", "rouge", "bleu", "entailment", "high_confidence",
                                 "high_confidence_quantile"},
                                "metrics");
    c.metrics.exact_match = doc["metrics"].value("exact_match", true);
    c.metrics.rouge = doc["metrics"].value("rouge", true);
    c.metrics.bleu = doc["metrics"].value("bleu", true);
    c.metrics.entailment = doc["metrics"].value("entailment", true);
    c.metrics.high_confidence = doc["metrics"].value("high_confidence", true);
    c.metrics.high_confidence_quantile =
        doc["metrics"].value("high_confidence_quantile", 0.5);
  }
  if (doc.contains("pass_fail") && !doc["pass_fail"].is_null()) {
    detail::reject_unknown_keys(doc["pass_fail"], {"path", "k"}, "pass_fail");
    PassFailSpec pf;
    pf.path = doc["pass_fail"].value("path", "");
    pf.k = doc["pass_fail"].value("k", 2);
    if (pf.path.empty()) throw InputError("config: pass_fail.path is required when set");
    c.pass_fail = pf;
  }
  if (doc.contains("out_dir")) c.out_dir = doc["out_dir"].get<std::string>();
  if (doc.contains("master_seed")) c.master_seed = doc["master_seed"].get<std::uint64_t>();
  if (doc.contains("workers")) c.workers = doc["workers"].get<int>();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json doc;
  doc["dataset"] = c.dataset;
  doc["target_model"] = detail::model_spec_to_json(c.target_model);
  doc["draft_model"] =
      c.draft_model ? detail::model_spec_to_json(*c.draft_model) : nlohmann::json(nullptr);
  doc["decoders"] = c.decoders;
  doc["decoder_config"] = detail::decoder_config_to_json(c.decoder);
  doc["decoder_overrides"] = nlohmann::json::object();
  for (const auto& [name, obj] : c.decoder_overrides) doc["decoder_overrides"][name] = obj;
  doc["oracle"] = c.oracle;
  doc["nli"] = {{"endpoint", c.nli.endpoint},
                {"cache", c.nli_cache},
                {"service_identity", c.nli.service_identity},
                {"max_attempts", c.nli.max_attempts},
                {"backoff_ms", static_cast<int>(c.nli.backoff_base.count())}};
  doc["uncertainty"] = {
      {"predictive_entropy_mode",
       c.predictive_mode == semantic::PredictiveEntropyMode::McLengthNormalized
           ? "mc-length-normalized"
           : "renormalized-discrete"},
      {"semantic_entropy_mode",
       c.semantic_mode == semantic::SemanticEntropyMode::ClusterAssignment
           ? "cluster-assignment"
           : "probability-weighted"}};
  doc["metrics"] = {{"exact_match", c.metrics.exact_match},
                    {"rouge", c.metrics.rouge},
                    {"bleu", c.metrics.bleu},
                    {"entailment", c.metrics.entailment},
                    {"high_confidence", c.metrics.high_confidence},
                    {"high_confidence_quantile", c.metrics.high_confidence_quantile}};
  doc["pass_fail"] = c.pass_fail
                         ? nlohmann::json{{"path", c.pass_fail->path}, {"k", c.pass_fail->k}}
                         : nlohmann::json(nullptr);
  doc["out_dir"] = c.out_dir;
  doc["master_seed"] = c.master_seed;
  doc["workers"] = c.workers;
  return doc;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open '" + path.string() + "'");
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw InputError("config: '" + path.string() + "' is not valid JSON");
  return config_from_json(doc);
}

// ============================================================
// Models
// ============================================================

inline std::unique_ptr<lm::SequenceModel> load_model(const ModelSpec& spec) {
  if (spec.kind == "tabular")
    return std::make_unique<lm::TabularMarkovModel>(lm::load_tabular(spec.path));
  std::ifstream in(spec.path);
  if (!in) throw InputError("model: cannot open corpus '" + spec.path + "'");
  std::stringstream corpus;
  corpus << in.rdbuf();
  return std::make_unique<lm::NgramModel>(
      lm::train_ngram(corpus.str(), spec.ngram_order, spec.ngram_smoothing));
}

// ============================================================
// Rows
// ============================================================

/** One prompt x decoder result row. NaN means "not applicable". */
struct PromptRow {
  std::string prompt_id;
  std::string decoder;
  double num_records = 0.0;
  double predictive_entropy = 0.0;
  double semantic_entropy = 0.0;
  double num_clusters = 0.0;
  double semantic_agreement = 0.0;
  double response_diversity = 0.0;
  double mean_cluster_size = 0.0;
  double std_cluster_size = 0.0;
  double mean_confidence = 0.0;
  double exact_match = 0.0;
  double rouge1_f1 = 0.0;
  double rouge2_f1 = 0.0;
  double rougeL_f1 = 0.0;
  double bleu = 0.0;
  double context_entailment = 0.0;
  double reference_entailment = 0.0;
  double context_answer_gap = 0.0;
  double high_conf_entailment = 0.0;
  double acceptance_rate = 0.0;
};

/** Registry driving the CSV header, JSON fields, and aggregation alike. */
inline const std::vector<std::pair<const char*, double PromptRow::*>>& numeric_columns() {
  static const std::vector<std::pair<const char*, double PromptRow::*>> columns{
      {"num_records", &PromptRow::num_records},
      {"predictive_entropy", &PromptRow::predictive_entropy},
      {"semantic_entropy", &PromptRow::semantic_entropy},
      {"num_clusters", &PromptRow::num_clusters},
      {"semantic_agreement", &PromptRow::semantic_agreement},
      {"response_diversity", &PromptRow::response_diversity},
      {"mean_cluster_size", &PromptRow::mean_cluster_size},
      {"std_cluster_size", &PromptRow::std_cluster_size},
      {"mean_confidence", &PromptRow::mean_confidence},
      {"exact_match", &PromptRow::exact_match},
      {"rouge1_f1", &PromptRow::rouge1_f1},
      {"rouge2_f1", &PromptRow::rouge2_f1},
      {"rougeL_f1", &PromptRow::rougeL_f1},
      {"bleu", &PromptRow::bleu},
      {"context_entailment", &PromptRow::context_entailment},
      {"reference_entailment", &PromptRow::reference_entailment},
      {"context_answer_gap", &PromptRow::context_answer_gap},
      {"high_conf_entailment", &PromptRow::high_conf_entailment},
      {"acceptance_rate", &PromptRow::acceptance_rate},
  };
  return columns;
}

struct AggregateRow {
  std::string decoder;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

/** Mean and population std per decoder per metric over finite cells. */
inline std::vector<AggregateRow> aggregate(const std::vector<PromptRow>& rows,
                                           const std::vector<std::string>& decoder_order) {
  std::vector<AggregateRow> out;
  for (const auto& decoder : decoder_order) {
    for (const auto& [name, member] : numeric_columns()) {
      std::vector<double> values;
      for (const auto& row : rows)
        if (row.decoder == decoder && std::isfinite(row.*member)) values.push_back(row.*member);
      if (values.empty()) {
        std::cerr << "aggregate: no finite values for " << decoder << "/" << name
                  << ", group omitted\n";
        continue;
      }
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(values.size());
      out.push_back({decoder, name, mean, std::sqrt(var), values.size()});
    }
  }
  return out;
}

// ============================================================
// Report
// ============================================================

/** Per-sample detail kept for the JSON report. */
struct SampleDetail {
  std::string text;
  std::vector<lm::TokenId> tokens;
  double log_prob = 0.0;
  double confidence = 0.0;
  double score = 0.0;  // length-penalized
  std::string stop_reason;
  std::optional<int> branch_index;
};

struct SlotSamples {
  std::string prompt_id;
  std::string decoder;
  std::vector<SampleDetail> samples;
  std::string selected;
};

struct MetricReport {
  nlohmann::json config_echo;
  std::vector<PromptRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<SlotSamples> samples;
  std::vector<std::string> failures;
  std::optional<PassAtKSummary> pass_at_k;
};

// ============================================================
// Runner
// ============================================================

namespace detail {

inline decode::DecoderConfig decoder_config_for(const ExperimentConfig& config,
                                                const std::string& decoder) {
  decode::DecoderConfig c = config.decoder;
  auto it = config.decoder_overrides.find(decoder);
  if (it != config.decoder_overrides.end())
    decoder_config_from_json(c, it->second, "decoder_overrides." + decoder);
  return c;
}

/** Generate the record set for one prompt x decoder cell. */
inline std::vector<decode::GenerationRecord> generate_records(
    const std::string& decoder, const lm::SequenceModel& target, const lm::SequenceModel* draft,
    std::span<const lm::TokenId> prompt_tokens, const decode::DecoderConfig& cfg,
    const std::string& prompt_id, std::uint64_t master_seed, std::vector<double>* acceptance) {
  std::vector<decode::GenerationRecord> records;
  if (decoder == "cot") {
    std::mt19937_64 rng(derive_seed(master_seed, prompt_id, decoder, 0));
    records = decode::cot_branch_decode(target, prompt_tokens, cfg, rng);
    return records;
  }
  records.reserve(cfg.num_samples);
  for (std::size_t i = 0; i < cfg.num_samples; ++i) {
    std::mt19937_64 rng(derive_seed(master_seed, prompt_id, decoder, i));
    if (decoder == "greedy") {
      records.push_back(decode::greedy_decode(target, prompt_tokens, cfg));
    } else if (decoder == "baseline") {
      records.push_back(decode::sample_decode(target, prompt_tokens, cfg, rng));
    } else {  // speculative
      auto [rec, stats] = decode::speculative_decode(target, *draft, prompt_tokens, cfg, rng);
      if (acceptance) acceptance->push_back(stats.acceptance_rate());
      records.push_back(std::move(rec));
    }
  }
  return records;
}

inline double population_std(const std::vector<std::size_t>& values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (std::size_t v : values) mean += static_cast<double>(v);
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (std::size_t v : values) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace detail

/**
 * Run the full prompt x decoder matrix. Per-cell errors are recorded in
 * MetricReport::failures and the run continues; configuration and input
 * errors (bad dataset, missing model file) throw before any generation.
 */
inline MetricReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<PromptRecord> prompts = load_dataset(config.dataset);
  std::unique_ptr<lm::SequenceModel> target = load_model(config.target_model);
  std::unique_ptr<lm::SequenceModel> draft;
  if (config.draft_model) draft = load_model(*config.draft_model);

  std::unique_ptr<nli::NliClient> nli_client;
  std::unique_ptr<semantic::EquivalenceOracle> oracle;
  if (config.oracle == "remote") {
    nli_client = std::make_unique<nli::NliClient>(config.nli, config.nli_cache);
    oracle = nli::as_equivalence_oracle(*nli_client);
  } else {
    oracle = std::make_unique<semantic::RuleBasedOracle>();
  }

  struct Slot {
    std::optional<PromptRow> row;
    std::optional<SlotSamples> samples;
    std::optional<std::string> failure;
  };
  const std::size_t n_slots = prompts.size() * config.decoders.size();
  std::vector<Slot> slots(n_slots);

  auto run_slot = [&](std::size_t slot_index) {
    const PromptRecord& prompt = prompts[slot_index / config.decoders.size()];
    const std::string& decoder = config.decoders[slot_index % config.decoders.size()];
    Slot& slot = slots[slot_index];
    try {
      const decode::DecoderConfig cfg = detail::decoder_config_for(config, decoder);
      const std::vector<lm::TokenId> prompt_tokens = target->vocab().tokenize(prompt.prompt);
      std::vector<double> acceptance;
      std::vector<decode::GenerationRecord> records = detail::generate_records(
          decoder, *target, draft.get(), prompt_tokens, cfg, prompt.id, config.master_seed,
          &acceptance);
      if (records.empty()) throw ModelError("decoder produced no records");

      std::vector<std::string> texts;
      std::vector<double> confidences;
      for (const auto& r : records) {
        texts.push_back(r.text);
        confidences.push_back(decode::branch_confidence(r));
      }
      semantic::SemanticClustering clustering = semantic::cluster_semantic(*oracle, texts);
      semantic::UncertaintyReport unc =
          semantic::uncertainty_report(records, clustering, config.predictive_mode,
                                       config.semantic_mode);

      PromptRow row;
      row.prompt_id = prompt.id;
      row.decoder = decoder;
      row.num_records = static_cast<double>(records.size());
      row.predictive_entropy = unc.predictive_entropy;
      row.semantic_entropy = unc.semantic_entropy;
      row.num_clusters = static_cast<double>(unc.num_clusters);
      row.semantic_agreement = unc.semantic_agreement;
      row.response_diversity = unc.response_diversity;
      row.mean_cluster_size =
          static_cast<double>(records.size()) / static_cast<double>(unc.num_clusters);
      row.std_cluster_size = detail::population_std(unc.cluster_sizes);
      double conf_sum = 0.0;
      for (double c : confidences) conf_sum += c;
      row.mean_confidence = conf_sum / static_cast<double>(confidences.size());

      row.exact_match = nan;
      row.rouge1_f1 = nan;
      row.rouge2_f1 = nan;
      row.rougeL_f1 = nan;
      row.bleu = nan;
      row.context_entailment = nan;
      row.reference_entailment = nan;
      row.context_answer_gap = nan;
      row.high_conf_entailment = nan;
      row.acceptance_rate = nan;

      if (!prompt.references.empty()) {
        double em = 0.0, r1 = 0.0, r2 = 0.0, rl = 0.0, bl = 0.0, ctx_e = 0.0, ref_e = 0.0;
        std::vector<double> ctx_scores, ref_scores;
        for (const auto& rec : records) {
          eval::QualityReport q =
              eval::score_generation(rec.text, prompt.context, prompt.references, *oracle);
          em += q.exact_match ? 1.0 : 0.0;
          r1 += q.rouge1.f1;
          r2 += q.rouge2.f1;
          rl += q.rouge_l.f1;
          bl += q.bleu;
          ctx_e += q.context_entailment;
          ref_e += q.reference_entailment;
          if (!prompt.context.empty()) {
            ctx_scores.push_back(q.context_entailment);
            ref_scores.push_back(q.reference_entailment);
          }
        }
        const double n = static_cast<double>(records.size());
        if (config.metrics.exact_match) row.exact_match = em / n;
        if (config.metrics.rouge) {
          row.rouge1_f1 = r1 / n;
          row.rouge2_f1 = r2 / n;
          row.rougeL_f1 = rl / n;
        }
        if (config.metrics.bleu) row.bleu = bl / n;
        if (config.metrics.entailment) {
          row.reference_entailment = ref_e / n;
          if (!prompt.context.empty()) {
            row.context_entailment = ctx_e / n;
            row.context_answer_gap = eval::context_answer_gap(ctx_scores, ref_scores);
          }
        }
        if (config.metrics.high_confidence)
          row.high_conf_entailment = eval::high_confidence_entailment(
              texts, confidences, prompt.references.front(), *oracle,
              config.metrics.high_confidence_quantile);
      }
      if (decoder == "speculative" && !acceptance.empty()) {
        double acc = 0.0;
        for (double a : acceptance) acc += a;
        row.acceptance_rate = acc / static_cast<double>(acceptance.size());
      }

      SlotSamples samples;
      samples.prompt_id = prompt.id;
      samples.decoder = decoder;
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        SampleDetail d;
        d.text = rec.text;
        d.tokens = rec.tokens;
        d.log_prob = rec.total_log_prob();
        d.confidence = confidences[i];
        d.score = decode::record_score(rec, cfg.length_penalty);
        d.stop_reason = std::string(decode::to_string(rec.stop_reason));
        d.branch_index = rec.branch_index;
        samples.samples.push_back(std::move(d));
      }
      if (decoder == "cot") {
        auto pruned = decode::prune_branches(records, *oracle, cfg.confidence_threshold);
        std::size_t best = 0;
        for (std::size_t i = 1; i < pruned.size(); ++i)
          if (decode::branch_confidence(pruned[i]) > decode::branch_confidence(pruned[best]))
            best = i;
        samples.selected = pruned[best].text;
      } else {
        std::size_t best = 0;
        for (std::size_t i = 1; i < records.size(); ++i)
          if (decode::record_score(records[i], cfg.length_penalty) >
              decode::record_score(records[best], cfg.length_penalty))
            best = i;
        samples.selected = records[best].text;
      }

      slot.row = std::move(row);
      slot.samples = std::move(samples);
    } catch (const std::exception& e) {
      slot.failure = prompt.id + "/" + decoder + ": " + e.what();
    }
  };

  const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(n_slots)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n_slots; ++i) run_slot(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n_slots) return;
          run_slot(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  MetricReport report;
  report.config_echo = config_to_json(config);
  for (auto& slot : slots) {
    if (slot.row) report.rows.push_back(std::move(*slot.row));
    if (slot.samples) report.samples.push_back(std::move(*slot.samples));
    if (slot.failure) report.failures.push_back(std::move(*slot.failure));
  }
  report.aggregates = aggregate(report.rows, config.decoders);
  if (config.pass_fail)
    report.pass_at_k = compute_pass_at_k(load_pass_fail(config.pass_fail->path),
                                         config.pass_fail->k);
  return report;
}

}  // namespace declab::harness
