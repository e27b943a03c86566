#pragma once

/**
 * spec_oracle.hpp - exhaustive enumeration of sequence distributions.
 *
 * Two independent routes to the same object:
 *
 *   exact_autoregressive_distribution  multiplies transformed next-token
 *     probabilities directly (plain ancestral sampling, in closed form).
 *
 *   exact_speculative_distribution     enumerates every draft proposal,
 *     acceptance coin, residual draw, and bonus draw of the speculative
 *     scheme, in closed form.
 *
 * The two must agree to floating-point noise; the checker below reports
 * the largest per-sequence deviation. This module intentionally does not
 * include the decoder implementation, so it stays an independent check
 * of it rather than a restatement.
 *
 * Process semantics enumerated here (the decoder must match):
 *   - per iteration the draft proposes up to min(gamma, remaining)
 *     tokens, stopping early after proposing a stop token;
 *   - proposals adjudicate in order with acceptance prob min(1, p/q);
 *   - the first rejection replaces the proposal with one draw from
 *     normalize(max(0, p - q)) and ends the iteration;
 *   - an accepted stop token ends the sequence, remaining proposals
 *     are discarded;
 *   - when every proposal is accepted and the sequence is neither
 *     stopped nor at the horizon, one bonus token is drawn from the
 *     target distribution at the next position.
 */

#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "declab/model.hpp"
#include "declab/prob.hpp"
#include "declab/vocab.hpp"

namespace declab::oracle {

using SeqDist = std::map<std::vector<lm::TokenId>, double>;

// ============================================================
// Plain autoregressive route
// ============================================================

namespace detail {

inline bool terminal(const lm::Vocabulary& vocab, const std::vector<lm::TokenId>& seq,
                     std::size_t horizon) {
  if (seq.size() >= horizon) return true;
  return !seq.empty() && vocab.is_stop(seq.back());
}

inline void expand_autoregressive(const lm::SequenceModel& model,
                                  std::span<const lm::TokenId> prompt,
                                  const lm::SamplingParams& params, std::size_t horizon,
                                  std::vector<lm::TokenId>& prefix, double mass, SeqDist& out) {
  if (terminal(model.vocab(), prefix, horizon)) {
    out[prefix] += mass;
    return;
  }
  std::vector<lm::TokenId> ctx(prompt.begin(), prompt.end());
  ctx.insert(ctx.end(), prefix.begin(), prefix.end());
  lm::ProbDist dist = lm::next_token_dist(model, ctx, params);
  for (std::size_t t = 0; t < dist.size(); ++t) {
    if (dist.p[t] <= 0.0) continue;
    prefix.push_back(static_cast<lm::TokenId>(t));
    expand_autoregressive(model, prompt, params, horizon, prefix, mass * dist.p[t], out);
    prefix.pop_back();
  }
}

}  // namespace detail

/** Exact distribution over sequences sampled token by token. */
inline SeqDist exact_autoregressive_distribution(const lm::SequenceModel& model,
                                                 std::span<const lm::TokenId> prompt,
                                                 const lm::SamplingParams& params,
                                                 std::size_t horizon) {
  if (horizon == 0) throw ParameterError("oracle: horizon must be >= 1");
  SeqDist out;
  std::vector<lm::TokenId> prefix;
  detail::expand_autoregressive(model, prompt, params, horizon, prefix, 1.0, out);
  return out;
}

// ============================================================
// Speculative route
// ============================================================

namespace detail {

struct SpecEnumerator {
  const lm::SequenceModel& target;
  const lm::SequenceModel& draft;
  std::span<const lm::TokenId> prompt;
  const lm::SamplingParams& params;
  int gamma;
  std::size_t horizon;
  SeqDist final;
  std::map<std::vector<lm::TokenId>, double> work;

  void emit(const std::vector<lm::TokenId>& seq, double mass) {
    if (mass <= 0.0) return;
    if (terminal(target.vocab(), seq, horizon))
      final[seq] += mass;
    else
      work[seq] += mass;
  }

  lm::ProbDist dist_at(const lm::SequenceModel& model, const std::vector<lm::TokenId>& emitted,
                       const std::vector<lm::TokenId>& acc) const {
    std::vector<lm::TokenId> ctx(prompt.begin(), prompt.end());
    ctx.insert(ctx.end(), emitted.begin(), emitted.end());
    ctx.insert(ctx.end(), acc.begin(), acc.end());
    return lm::next_token_dist(model, ctx, params);
  }

  /**
   * Enumerate the j-th proposal of one iteration. `acc` holds
   * already-accepted proposals; `g` is this iteration's draft budget.
   */
  void expand_proposal(const std::vector<lm::TokenId>& emitted, std::vector<lm::TokenId>& acc,
                       int j, int g, double mass) {
    lm::ProbDist q = dist_at(draft, emitted, acc);
    lm::ProbDist p = dist_at(target, emitted, acc);

    // residual distribution for the rejection branch: normalize(max(0, p - q))
    std::vector<double> residual(p.size(), 0.0);
    double residual_mass = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) {
      residual[t] = std::max(0.0, p.p[t] - q.p[t]);
      residual_mass += residual[t];
    }

    for (std::size_t x = 0; x < q.size(); ++x) {
      if (q.p[x] <= 0.0) continue;
      const double accept = std::min(1.0, p.p[x] / q.p[x]);

      if (accept < 1.0 && residual_mass > 0.0) {
        const double reject_mass = mass * q.p[x] * (1.0 - accept);
        std::vector<lm::TokenId> seq(emitted);
        seq.insert(seq.end(), acc.begin(), acc.end());
        seq.push_back(0);
        for (std::size_t z = 0; z < residual.size(); ++z) {
          if (residual[z] <= 0.0) continue;
          seq.back() = static_cast<lm::TokenId>(z);
          emit(seq, reject_mass * residual[z] / residual_mass);
        }
      }

      if (accept <= 0.0) continue;
      const double accept_mass = mass * q.p[x] * accept;
      acc.push_back(static_cast<lm::TokenId>(x));
      const std::size_t total_len = emitted.size() + acc.size();
      const bool stopped = target.vocab().is_stop(static_cast<lm::TokenId>(x));
      if (stopped || total_len >= horizon) {
        std::vector<lm::TokenId> seq(emitted);
        seq.insert(seq.end(), acc.begin(), acc.end());
        emit(seq, accept_mass);
      } else if (j + 1 == g) {
        // every proposal accepted: bonus token from the target
        lm::ProbDist bonus = dist_at(target, emitted, acc);
        std::vector<lm::TokenId> seq(emitted);
        seq.insert(seq.end(), acc.begin(), acc.end());
        seq.push_back(0);
        for (std::size_t z = 0; z < bonus.size(); ++z) {
          if (bonus.p[z] <= 0.0) continue;
          seq.back() = static_cast<lm::TokenId>(z);
          emit(seq, accept_mass * bonus.p[z]);
        }
      } else {
        expand_proposal(emitted, acc, j + 1, g, accept_mass);
      }
      acc.pop_back();
    }
  }

  SeqDist run() {
    work[{}] = 1.0;
    while (!work.empty()) {
      // shortest prefix first so every state is expanded exactly once
      auto it = work.begin();
      for (auto jt = work.begin(); jt != work.end(); ++jt)
        if (jt->first.size() < it->first.size()) it = jt;
      std::vector<lm::TokenId> emitted = it->first;
      double mass = it->second;
      work.erase(it);
      const int g = static_cast<int>(
          std::min<std::size_t>(static_cast<std::size_t>(gamma), horizon - emitted.size()));
      std::vector<lm::TokenId> acc;
      expand_proposal(emitted, acc, 0, g, mass);
    }
    return final;
  }
};

}  // namespace detail

/** Exact distribution over sequences emitted by the speculative scheme. */
inline SeqDist exact_speculative_distribution(const lm::SequenceModel& target,
                                              const lm::SequenceModel& draft,
                                              std::span<const lm::TokenId> prompt,
                                              const lm::SamplingParams& params, int gamma,
                                              std::size_t horizon) {
  if (horizon == 0) throw ParameterError("oracle: horizon must be >= 1");
  if (gamma < 1) throw ParameterError("oracle: gamma must be >= 1");
  if (!(target.vocab() == draft.vocab()))
    throw ParameterError("oracle: target and draft must share a vocabulary");
  detail::SpecEnumerator e{target, draft, prompt, params, gamma, horizon, {}, {}};
  return e.run();
}

// ============================================================
// Comparison
// ============================================================

/** Largest per-sequence probability deviation over the union of keys. */
inline double max_abs_difference(const SeqDist& a, const SeqDist& b) {
  double m = 0.0;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    m = std::max(m, std::abs(v - (it == b.end() ? 0.0 : it->second)));
  }
  for (const auto& [k, v] : b)
    if (!a.count(k)) m = std::max(m, std::abs(v));
  return m;
}

/** Total variation distance over the union of keys. */
inline double total_variation(const SeqDist& a, const SeqDist& b) {
  double s = 0.0;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    s += std::abs(v - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : b)
    if (!a.count(k)) s += std::abs(v);
  return 0.5 * s;
}

}  // namespace declab::oracle
