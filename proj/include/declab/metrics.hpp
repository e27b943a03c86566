#pragma once

/**
 * metrics.hpp - reference-based quality metrics over normalized text.
 *
 * All text metrics share normalize_text, so "Paris." and "paris" score
 * as the same answer. ROUGE uses clipped n-gram overlap and LCS; BLEU
 * uses add-one smoothing on orders above 1 and the standard brevity
 * penalty; pass@k uses the numerically stable product form.
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "declab/common.hpp"
#include "declab/entail.hpp"
#include "declab/text.hpp"

namespace declab::eval {

// ============================================================
// Exact match
// ============================================================

/** Equality of normalized forms. */
inline bool exact_match(std::string_view prediction, std::string_view reference) {
  return normalize_text(prediction) == normalize_text(reference);
}

// ============================================================
// ROUGE
// ============================================================

struct Rouge {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

namespace detail {

inline Rouge rouge_from_counts(double overlap, double pred_total, double ref_total) {
  Rouge r;
  if (pred_total > 0.0) r.precision = overlap / pred_total;
  if (ref_total > 0.0) r.recall = overlap / ref_total;
  if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

inline std::map<std::vector<std::string>, double> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, double> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)] += 1.0;
  return counts;
}

}  // namespace detail

/** Clipped n-gram overlap precision/recall/F1. Zero when either side has no n-grams. */
inline Rouge rouge_n(std::string_view prediction, std::string_view reference, int n) {
  if (n < 1) throw ParameterError("rouge-n: n must be >= 1");
  auto pred = normalized_tokens(prediction);
  auto ref = normalized_tokens(reference);
  auto pc = detail::ngram_counts(pred, n);
  auto rc = detail::ngram_counts(ref, n);
  double overlap = 0.0, pred_total = 0.0, ref_total = 0.0;
  for (const auto& [g, c] : pc) pred_total += c;
  for (const auto& [g, c] : rc) ref_total += c;
  for (const auto& [g, c] : pc) {
    auto it = rc.find(g);
    if (it != rc.end()) overlap += std::min(c, it->second);
  }
  return detail::rouge_from_counts(overlap, pred_total, ref_total);
}

/** Longest-common-subsequence precision/recall/F1 over normalized tokens. */
inline Rouge rouge_l(std::string_view prediction, std::string_view reference) {
  auto pred = normalized_tokens(prediction);
  auto ref = normalized_tokens(reference);
  if (pred.empty() || ref.empty()) return {};
  std::vector<std::vector<std::size_t>> dp(pred.size() + 1, std::vector<std::size_t>(ref.size() + 1, 0));
  for (std::size_t i = 1; i <= pred.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      dp[i][j] = pred[i - 1] == ref[j - 1] ? dp[i - 1][j - 1] + 1
                                           : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  const double lcs = static_cast<double>(dp[pred.size()][ref.size()]);
  return detail::rouge_from_counts(lcs, static_cast<double>(pred.size()),
                                   static_cast<double>(ref.size()));
}

// ============================================================
// BLEU
// ============================================================

/**
 * Corpus-of-one BLEU: geometric mean of clipped n-gram precisions for
 * n = 1..max_n with add-one smoothing on orders above 1, times the
 * brevity penalty exp(min(0, 1 - ref_len/pred_len)) against the
 * closest-length reference (ties toward the shorter). An empty
 * prediction scores 0.
 */
inline double bleu(std::string_view prediction, std::span<const std::string> references,
                   int max_n = 4) {
  if (max_n < 1) throw ParameterError("bleu: max_n must be >= 1");
  if (references.empty()) throw ParameterError("bleu: need at least one reference");
  auto pred = normalized_tokens(prediction);
  if (pred.empty()) return 0.0;

  std::vector<std::vector<std::string>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(normalized_tokens(r));

  double log_geo = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    auto pc = detail::ngram_counts(pred, n);
    std::map<std::vector<std::string>, double> max_ref;
    for (const auto& ref : refs)
      for (const auto& [g, c] : detail::ngram_counts(ref, n))
        max_ref[g] = std::max(max_ref[g], c);
    double overlap = 0.0, total = 0.0;
    for (const auto& [g, c] : pc) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) overlap += std::min(c, it->second);
    }
    const double smoothing = n > 1 ? 1.0 : 0.0;
    const double precision = (overlap + smoothing) / (total + smoothing);
    if (precision <= 0.0) return 0.0;  // unsmoothed unigram precision of zero
    log_geo += std::log(precision);
  }
  log_geo /= static_cast<double>(max_n);

  // closest reference length, ties toward the shorter reference
  std::size_t ref_len = refs.front().size();
  for (const auto& ref : refs) {
    const auto d = [&](std::size_t len) {
      return len > pred.size() ? len - pred.size() : pred.size() - len;
    };
    if (d(ref.size()) < d(ref_len) || (d(ref.size()) == d(ref_len) && ref.size() < ref_len))
      ref_len = ref.size();
  }
  const double bp =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(pred.size())));
  return bp * std::exp(log_geo);
}

// ============================================================
// Entailment metrics
// ============================================================

/** Oracle label on the 0/1/2 scale as a real number. */
inline double entailment_score(semantic::EquivalenceOracle& oracle, const std::string& premise,
                               const std::string& hypothesis) {
  return static_cast<double>(static_cast<int>(oracle.judge(premise, hypothesis).label));
}

/**
 * Fraction of the top confidence quantile of generations whose
 * bidirectional entailment with the reference holds. The top
 * ceil(quantile * N) records are selected by confidence, ties toward
 * the earlier index. quantile must lie in (0, 1].
 */
inline double high_confidence_entailment(std::span<const std::string> texts,
                                         std::span<const double> confidences,
                                         const std::string& reference,
                                         semantic::EquivalenceOracle& oracle,
                                         double quantile = 0.5) {
  if (texts.empty()) throw ParameterError("high confidence entailment: no generations");
  if (texts.size() != confidences.size())
    throw ParameterError("high confidence entailment: confidence count mismatch");
  if (!(quantile > 0.0) || quantile > 1.0)
    throw ParameterError("high confidence entailment: quantile must be in (0, 1]");

  std::vector<std::size_t> order(texts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return confidences[a] > confidences[b]; });
  const auto take = static_cast<std::size_t>(
      std::ceil(quantile * static_cast<double>(texts.size())));
  double hits = 0.0;
  for (std::size_t i = 0; i < take; ++i)
    if (semantic::bidirectional_entail(oracle, texts[order[i]], reference)) hits += 1.0;
  return hits / static_cast<double>(take);
}

/** Mean absolute difference between paired context and reference scores. */
inline double context_answer_gap(std::span<const double> context_scores,
                                 std::span<const double> reference_scores) {
  if (context_scores.size() != reference_scores.size() || context_scores.empty())
    throw ParameterError("context-answer gap: need matching non-empty score lists");
  double acc = 0.0;
  for (std::size_t i = 0; i < context_scores.size(); ++i)
    acc += std::abs(context_scores[i] - reference_scores[i]);
  return acc / static_cast<double>(context_scores.size());
}

// ============================================================
// pass@k
// ============================================================

/**
 * Unbiased pass@k: 1 - C(n-c, k) / C(n, k), evaluated as the stable
 * product 1 - prod_{i=0..k-1} (n-c-i)/(n-i).
 */
inline double pass_at_k(int n, int c, int k) {
  if (n < 1) throw ParameterError("pass@k: n must be >= 1");
  if (c < 0 || c > n) throw ParameterError("pass@k: c must be in [0, n]");
  if (k < 1 || k > n) throw ParameterError("pass@k: k must be in [1, n]");
  if (n - c < k) return 1.0;
  double prod = 1.0;
  for (int i = 0; i < k; ++i)
    prod *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
  return 1.0 - prod;
}

// ============================================================
// Per-generation report
// ============================================================

/** Quality summary of a single generation against its references. */
struct QualityReport {
  bool exact_match = false;          // vs any reference
  Rouge rouge1, rouge2, rouge_l;     // best-F1 reference
  double bleu = 0.0;                 // multi-reference
  double context_entailment = 0.0;   // judge(context, generation), 0/1/2
  double reference_entailment = 0.0; // max over references, 0/1/2
};

inline QualityReport score_generation(const std::string& generation, const std::string& context,
                                      std::span<const std::string> references,
                                      semantic::EquivalenceOracle& oracle) {
  if (references.empty()) throw ParameterError("score: need at least one reference");
  QualityReport out;
  auto better = [](const Rouge& a, const Rouge& b) { return b.f1 > a.f1; };
  for (const auto& ref : references) {
    out.exact_match = out.exact_match || exact_match(generation, ref);
    Rouge r1 = rouge_n(generation, ref, 1);
    Rouge r2 = rouge_n(generation, ref, 2);
    Rouge rl = rouge_l(generation, ref);
    if (better(out.rouge1, r1)) out.rouge1 = r1;
    if (better(out.rouge2, r2)) out.rouge2 = r2;
    if (better(out.rouge_l, rl)) out.rouge_l = rl;
    out.reference_entailment =
        std::max(out.reference_entailment, entailment_score(oracle, ref, generation));
  }
  out.bleu = bleu(generation, references);
  if (!context.empty()) out.context_entailment = entailment_score(oracle, context, generation);
  return out;
}

}  // namespace declab::eval
