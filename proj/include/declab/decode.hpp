#pragma once

/**
 * decode.hpp - the decoding strategies.
 *
 *   greedy_decode       argmax of the transformed distribution each step
 *   sample_decode       ancestral sampling from the transformed dist
 *   speculative_decode  draft proposes, target adjudicates; the output
 *                       law equals plain target sampling exactly
 *   cot_branch_decode   fan out over the top first tokens, then sample
 *                       each branch to a stop token
 *
 * Every decoder owns no state: models are shared read-only and each call
 * takes its own rng, so calls are reentrant and independently seeded.
 * Per-token log probs and confidence gaps always come from the
 * transformed distribution actually decoded from (for speculative
 * decoding that is the target's, which is what the output law follows).
 */

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "declab/cluster.hpp"
#include "declab/common.hpp"
#include "declab/model.hpp"
#include "declab/prob.hpp"
#include "declab/record.hpp"
#include "declab/vocab.hpp"

namespace declab::decode {

namespace detail {

inline void append_step(GenerationRecord& rec, lm::TokenId token, const lm::ProbDist& dist) {
  const double p = dist.p[static_cast<std::size_t>(token)];
  if (!(p > 0.0)) throw ModelError("decode: sampled token has zero probability");
  rec.tokens.push_back(token);
  rec.token_log_probs.push_back(std::log(p));
  rec.token_top_gap.push_back(dist.top_gap());
}

inline void finish(GenerationRecord& rec, const lm::Vocabulary& vocab, StopReason reason) {
  rec.stop_reason = reason;
  rec.text = vocab.detokenize(rec.tokens);
  rec.validate();
}

}  // namespace detail

// ============================================================
// Greedy and sampled decoding
// ============================================================

/** Deterministic argmax decoding (ties toward the lowest token id). */
inline GenerationRecord greedy_decode(const lm::SequenceModel& model,
                                      std::span<const lm::TokenId> prompt,
                                      const DecoderConfig& config) {
  config.validate();
  const lm::SamplingParams params = config.sampling();
  lm::ContextCursor cursor(model, {prompt.begin(), prompt.end()});
  GenerationRecord rec;
  rec.decoder_tag = "greedy";
  StopReason reason = StopReason::MaxLength;
  while (rec.tokens.size() < config.max_new_tokens) {
    lm::ProbDist dist = cursor.dist(params);
    const lm::TokenId token = dist.argmax();
    detail::append_step(rec, token, dist);
    cursor.push(token);
    if (model.vocab().is_stop(token)) {
      reason = StopReason::StopToken;
      break;
    }
  }
  detail::finish(rec, model.vocab(), reason);
  return rec;
}

/** Ancestral sampling from the transformed distribution. */
inline GenerationRecord sample_decode(const lm::SequenceModel& model,
                                      std::span<const lm::TokenId> prompt,
                                      const DecoderConfig& config, std::mt19937_64& rng) {
  config.validate();
  const lm::SamplingParams params = config.sampling();
  lm::ContextCursor cursor(model, {prompt.begin(), prompt.end()});
  GenerationRecord rec;
  rec.decoder_tag = "baseline";
  StopReason reason = StopReason::MaxLength;
  while (rec.tokens.size() < config.max_new_tokens) {
    lm::ProbDist dist = cursor.dist(params);
    const auto token = static_cast<lm::TokenId>(lm::sample_index(dist, rng));
    detail::append_step(rec, token, dist);
    cursor.push(token);
    if (model.vocab().is_stop(token)) {
      reason = StopReason::StopToken;
      break;
    }
  }
  detail::finish(rec, model.vocab(), reason);
  return rec;
}

// ============================================================
// Speculative decoding
// ============================================================

/**
 * Residual distribution after a rejection: normalize(max(0, p - q)).
 * Throws ModelError when p == q leaves no residual mass (a rejection is
 * unreachable there, so asking for the residual is a caller bug).
 */
inline lm::ProbDist residual_distribution(const lm::ProbDist& p, const lm::ProbDist& q) {
  if (p.size() != q.size())
    throw ParameterError("residual: distributions must share a support size");
  lm::ProbDist out;
  out.p.resize(p.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.p[i] = std::max(0.0, p.p[i] - q.p[i]);
    mass += out.p[i];
  }
  if (!(mass > 0.0)) throw ModelError("residual: degenerate residual, p and q coincide");
  for (double& x : out.p) x /= mass;
  return out;
}

/**
 * Draft/verify decoding. Per iteration the draft proposes up to
 * min(gamma, remaining) tokens (stopping early after proposing a stop
 * token); proposals are accepted with probability min(1, p/q); the
 * first rejection emits one residual token and ends the iteration; when
 * every proposal is accepted and the sequence is neither stopped nor at
 * the budget, one bonus token is drawn from the target.
 *
 * target_calls counts iterations: a real backend scores all positions
 * of one iteration in a single batched evaluation.
 */
inline std::pair<GenerationRecord, SpecStats> speculative_decode(
    const lm::SequenceModel& target, const lm::SequenceModel& draft,
    std::span<const lm::TokenId> prompt, const DecoderConfig& config, std::mt19937_64& rng) {
  config.validate();
  if (!(target.vocab() == draft.vocab()))
    throw ParameterError("speculative: target and draft must share a vocabulary");
  const lm::SamplingParams params = config.sampling();
  const lm::Vocabulary& vocab = target.vocab();

  GenerationRecord rec;
  rec.decoder_tag = "speculative";
  SpecStats stats;
  std::vector<lm::TokenId> ctx(prompt.begin(), prompt.end());
  lm::ContextCursor target_cursor(target, ctx);
  lm::ContextCursor draft_cursor(draft, ctx);

  bool stopped = false;
  while (!stopped && rec.tokens.size() < config.max_new_tokens) {
    const std::size_t remaining = config.max_new_tokens - rec.tokens.size();
    const std::size_t budget = std::min<std::size_t>(static_cast<std::size_t>(config.gamma), remaining);

    // draft proposals for this iteration
    struct Proposal {
      lm::TokenId token;
      lm::ProbDist q;
    };
    std::vector<Proposal> proposals;
    // resync the draft onto the verified context: drop proposals past
    // the first divergence, then adopt tokens the draft has not seen
    // (the bonus token leaves the target one ahead)
    {
      const auto verified = target_cursor.context();
      const auto drafted = draft_cursor.context();
      std::size_t common = 0;
      while (common < drafted.size() && common < verified.size() &&
             drafted[common] == verified[common])
        ++common;
      draft_cursor.truncate(common);
      for (std::size_t j = common; j < verified.size(); ++j) draft_cursor.push(verified[j]);
    }
    for (std::size_t j = 0; j < budget; ++j) {
      lm::ProbDist q = draft_cursor.dist(params);
      const auto x = static_cast<lm::TokenId>(lm::sample_index(q, rng));
      proposals.push_back({x, std::move(q)});
      draft_cursor.push(x);
      ++stats.drafted;
      if (vocab.is_stop(x)) break;
    }

    ++stats.target_calls;
    bool all_accepted = true;
    for (const Proposal& prop : proposals) {
      lm::ProbDist p = target_cursor.dist(params);
      const auto xi = static_cast<std::size_t>(prop.token);
      const double qx = prop.q.p[xi];
      if (!(qx > 0.0)) throw ModelError("speculative: draft proposed a zero-probability token");
      const double accept = std::min(1.0, p.p[xi] / qx);
      if (uniform01(rng) < accept) {
        ++stats.accepted;
        detail::append_step(rec, prop.token, p);
        target_cursor.push(prop.token);
        if (vocab.is_stop(prop.token)) {
          stopped = true;
          break;
        }
      } else {
        ++stats.rejected;
        lm::ProbDist residual = residual_distribution(p, prop.q);
        const auto z = static_cast<lm::TokenId>(lm::sample_index(residual, rng));
        detail::append_step(rec, z, p);  // telemetry follows the target law
        target_cursor.push(z);
        if (vocab.is_stop(z)) stopped = true;
        all_accepted = false;
        break;
      }
    }

    if (all_accepted && !stopped && rec.tokens.size() < config.max_new_tokens) {
      lm::ProbDist p = target_cursor.dist(params);
      const auto z = static_cast<lm::TokenId>(lm::sample_index(p, rng));
      detail::append_step(rec, z, p);
      target_cursor.push(z);
      if (vocab.is_stop(z)) stopped = true;
    }
  }

  detail::finish(rec, vocab, stopped ? StopReason::StopToken : StopReason::MaxLength);
  return {std::move(rec), stats};
}

// ============================================================
// Branch decoding
// ============================================================

/**
 * Mean per-step confidence gap of a record, optionally restricted to the
 * suffix starting at answer_start. Throws ParameterError when the span
 * is empty (confidence is undefined there).
 */
inline double branch_confidence(const GenerationRecord& rec, std::size_t answer_start = 0) {
  if (answer_start >= rec.token_top_gap.size())
    throw ParameterError("branch confidence: undefined for an empty span");
  double acc = 0.0;
  for (std::size_t i = answer_start; i < rec.token_top_gap.size(); ++i) acc += rec.token_top_gap[i];
  return acc / static_cast<double>(rec.token_top_gap.size() - answer_start);
}

/**
 * Fan out over the top-branching_factor first tokens of the transformed
 * first-step distribution (ties toward lower ids), then continue each
 * branch independently with temperature sampling (argmax when
 * greedy_branches is set) until a stop token or the budget. Produces one
 * record per branch, branch_index in fan-out order. A branching factor
 * above the vocabulary size is clamped with a warning; a first-step
 * support smaller than the factor yields that many branches.
 */
inline std::vector<GenerationRecord> cot_branch_decode(const lm::SequenceModel& model,
                                                       std::span<const lm::TokenId> prompt,
                                                       const DecoderConfig& config,
                                                       std::mt19937_64& rng) {
  config.validate();
  const lm::SamplingParams params = config.sampling();
  const lm::Vocabulary& vocab = model.vocab();

  std::size_t fan_out = config.branching_factor;
  if (fan_out > vocab.size()) {
    std::cerr << "cot_branch_decode: branching factor " << fan_out << " clamped to vocabulary size "
              << vocab.size() << "\n";
    fan_out = vocab.size();
  }

  lm::ProbDist first = lm::next_token_dist(model, prompt, params);
  auto order = lm::descending_order(first);
  std::vector<lm::TokenId> seeds;
  for (std::size_t i : order) {
    if (seeds.size() == fan_out) break;
    if (first.p[i] > 0.0) seeds.push_back(static_cast<lm::TokenId>(i));
  }

  std::vector<GenerationRecord> records;
  records.reserve(seeds.size());
  for (std::size_t b = 0; b < seeds.size(); ++b) {
    std::mt19937_64 branch_rng(rng());
    GenerationRecord rec;
    rec.decoder_tag = "cot";
    rec.branch_index = static_cast<int>(b);
    detail::append_step(rec, seeds[b], first);
    lm::ContextCursor cursor(model, {prompt.begin(), prompt.end()});
    cursor.push(seeds[b]);
    StopReason reason = StopReason::MaxLength;
    if (vocab.is_stop(seeds[b])) {
      reason = StopReason::StopToken;
    } else {
      while (rec.tokens.size() < config.max_new_tokens) {
        lm::ProbDist dist = cursor.dist(params);
        const lm::TokenId token =
            config.greedy_branches ? dist.argmax()
                                   : static_cast<lm::TokenId>(lm::sample_index(dist, branch_rng));
        detail::append_step(rec, token, dist);
        cursor.push(token);
        if (vocab.is_stop(token)) {
          reason = StopReason::StopToken;
          break;
        }
      }
    }
    detail::finish(rec, vocab, reason);
    records.push_back(std::move(rec));
  }
  return records;
}

/**
 * Drop branches whose confidence falls below the threshold, then keep
 * the highest-confidence representative of each semantic cluster among
 * the survivors (ties toward the earlier branch). The global best is
 * always kept, so the result is never empty. Survivors keep their input
 * order.
 */
inline std::vector<GenerationRecord> prune_branches(std::vector<GenerationRecord> records,
                                                    semantic::EquivalenceOracle& oracle,
                                                    double confidence_threshold) {
  if (records.empty()) throw ParameterError("prune: need at least one branch");
  std::vector<double> conf;
  conf.reserve(records.size());
  for (const auto& r : records) conf.push_back(branch_confidence(r));

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (conf[i] >= confidence_threshold) eligible.push_back(i);
  if (eligible.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i)
      if (conf[i] > conf[best]) best = i;
    return {records[best]};
  }

  std::vector<std::string> texts;
  texts.reserve(eligible.size());
  for (std::size_t i : eligible) texts.push_back(records[i].text);
  semantic::SemanticClustering clustering = semantic::cluster_semantic(oracle, texts);

  std::vector<std::size_t> keep;
  for (const auto& cluster : clustering.clusters) {
    std::size_t best = eligible[cluster.front()];
    for (std::size_t member : cluster) {
      const std::size_t idx = eligible[member];
      if (conf[idx] > conf[best]) best = idx;
    }
    keep.push_back(best);
  }
  std::sort(keep.begin(), keep.end());
  std::vector<GenerationRecord> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(std::move(records[i]));
  return out;
}

}  // namespace declab::decode
