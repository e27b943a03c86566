#pragma once

/**
 * record.hpp - generation records and decoder configuration.
 *
 * A GenerationRecord is the unit every downstream consumer works on:
 * clustering, entropies, quality metrics, and reports all read the same
 * per-token log probs and confidence gaps the decoder actually sampled
 * with. Records never store raw logits; gaps and log probs are taken
 * from the transformed distribution at each step.
 */

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "declab/common.hpp"
#include "declab/prob.hpp"
#include "declab/vocab.hpp"

namespace declab::decode {

// ============================================================
// Records
// ============================================================

enum class StopReason {
  StopToken,   // generation emitted a stop token
  MaxLength,   // token budget exhausted
  BranchPrune  // branch halted by a pruning pass
};

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::StopToken: return "stop-token";
    case StopReason::MaxLength: return "max-length";
    case StopReason::BranchPrune: return "branch-prune";
  }
  return "unknown";
}

/** One generated continuation plus its per-token telemetry. */
struct GenerationRecord {
  std::vector<lm::TokenId> tokens;
  std::vector<double> token_log_probs;  // ln p(token) under the transformed dist
  std::vector<double> token_top_gap;    // top1 - top2 of that dist
  StopReason stop_reason = StopReason::MaxLength;
  std::string decoder_tag;
  std::optional<int> branch_index;  // set by branch decoding only
  std::string text;                 // detokenized surface, filled by the decoder

  std::size_t length() const { return tokens.size(); }

  double total_log_prob() const {
    return std::accumulate(token_log_probs.begin(), token_log_probs.end(), 0.0);
  }

  /** Structural checks shared by all decoders. Throws InputError. */
  void validate() const {
    if (tokens.size() != token_log_probs.size() || tokens.size() != token_top_gap.size())
      throw InputError("record: telemetry arrays out of step with tokens");
    for (double lp : token_log_probs)
      if (std::isnan(lp) || lp > 1e-12) throw InputError("record: log prob must be <= 0");
    for (double g : token_top_gap)
      if (!(g >= -1e-12 && g <= 1.0 + 1e-12)) throw InputError("record: gap outside [0, 1]");
  }
};

/** Draft/accept telemetry from one speculative decoding call. */
struct SpecStats {
  std::size_t drafted = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t target_calls = 0;  // one batched target evaluation per iteration

  double acceptance_rate() const {
    return drafted == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(drafted);
  }
};

// ============================================================
// Configuration
// ============================================================

/**
 * Shared knobs for every decoder. Defaults are the reference settings:
 * temperature 0.4, nucleus 0.9, length penalty 1.2, 3-gram repetition
 * penalty, draft window 4, branching factor 10, 10 samples per prompt.
 */
struct DecoderConfig {
  double tau = 0.4;
  double top_p = 0.9;
  std::optional<std::size_t> top_k;   // off by default
  double length_penalty = 1.2;        // scoring-time exponent
  int repetition_n = 3;
  double repetition_penalty = 1.2;    // divisor for repeated n-grams
  std::size_t max_new_tokens = 16;
  int gamma = 4;                      // speculative draft window
  std::size_t branching_factor = 10;  // branch decoding fan-out
  std::size_t num_samples = 10;       // samples per prompt in the harness
  std::uint64_t seed = 0;
  bool greedy_branches = false;       // branch continuation: argmax instead of sampling
  double confidence_threshold = 0.0;  // branch pruning floor

  lm::SamplingParams sampling() const {
    lm::SamplingParams p;
    p.tau = tau;
    p.top_k = top_k;
    p.top_p = top_p > 0.0 && top_p < 1.0 ? std::optional<double>(top_p) : std::nullopt;
    if (top_p == 1.0) p.top_p = std::nullopt;
    p.repetition_n = repetition_n;
    p.repetition_penalty = repetition_penalty;
    return p;
  }

  /** Throws ParameterError when a field is out of range. */
  void validate() const {
    if (!(tau > 0.0)) throw ParameterError("config: tau must be > 0");
    if (!(top_p > 0.0) || top_p > 1.0) throw ParameterError("config: top_p must be in (0, 1]");
    if (top_k && *top_k == 0) throw ParameterError("config: top_k must be >= 1 when set");
    if (repetition_n < 1) throw ParameterError("config: repetition_n must be >= 1");
    if (repetition_penalty < 1.0) throw ParameterError("config: repetition_penalty must be >= 1");
    if (max_new_tokens == 0) throw ParameterError("config: max_new_tokens must be >= 1");
    if (gamma < 1) throw ParameterError("config: gamma must be >= 1");
    if (branching_factor == 0) throw ParameterError("config: branching_factor must be >= 1");
    if (num_samples == 0) throw ParameterError("config: num_samples must be >= 1");
  }
};

/** Length-penalized ranking score for a record (higher is better). */
inline double record_score(const GenerationRecord& rec, double length_penalty_alpha) {
  if (rec.tokens.empty()) throw ParameterError("record score: empty record");
  return rec.total_log_prob() / std::pow(static_cast<double>(rec.tokens.size()), length_penalty_alpha);
}

}  // namespace declab::decode
