#pragma once

/**
 * prob.hpp - next-token probability distributions and the sampling
 * transform pipeline.
 *
 * Pipeline order is part of the contract and never varies:
 *   temperature -> top-k -> top-p -> repetition penalty
 * Every filter renormalizes, so a transformed distribution is always a
 * valid distribution. Ties in top-k / top-p are broken toward the lowest
 * token id to keep runs reproducible.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "declab/common.hpp"
#include "declab/vocab.hpp"

namespace declab::lm {

// ============================================================
// ProbDist
// ============================================================

/** Probability vector over token ids 0..size()-1. */
struct ProbDist {
  std::vector<double> p;

  ProbDist() = default;
  explicit ProbDist(std::vector<double> probs) : p(std::move(probs)) {}

  std::size_t size() const { return p.size(); }

  double sum() const { return std::accumulate(p.begin(), p.end(), 0.0); }

  std::size_t support_size() const {
    std::size_t n = 0;
    for (double x : p)
      if (x > 0.0) ++n;
    return n;
  }

  /** Highest-probability id; ties break toward the lowest id. */
  TokenId argmax() const {
    if (p.empty()) throw ParameterError("prob dist: argmax of empty distribution");
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
      if (p[i] > p[best]) best = i;
    return static_cast<TokenId>(best);
  }

  /** Gap between the two largest entries; 1.0 when only one entry exists. */
  double top_gap() const {
    if (p.empty()) throw ParameterError("prob dist: top gap of empty distribution");
    double top1 = 0.0, top2 = 0.0;
    for (double x : p) {
      if (x > top1) {
        top2 = top1;
        top1 = x;
      } else if (x > top2) {
        top2 = x;
      }
    }
    return top1 - top2;
  }

  bool is_normalized(double tol = 1e-9) const {
    for (double x : p)
      if (!(x >= 0.0)) return false;
    return std::abs(sum() - 1.0) <= tol && support_size() > 0;
  }

  /** Divide by the current mass. Throws ModelError when all mass is gone. */
  void renormalize() {
    double s = sum();
    if (!(s > 0.0)) throw ModelError("prob dist: cannot renormalize zero mass");
    for (double& x : p) x /= s;
  }
};

// ============================================================
// Transforms
// ============================================================

/**
 * Numerically stable softmax of logits/tau.
 * Throws ParameterError for tau <= 0 and InputError for non-finite logits.
 */
inline ProbDist softmax_with_temperature(std::span<const double> logits, double tau) {
  if (!(tau > 0.0)) throw ParameterError("softmax: temperature must be > 0");
  if (logits.empty()) throw ParameterError("softmax: empty logits");
  double m = -std::numeric_limits<double>::infinity();
  for (double l : logits) {
    if (std::isnan(l) || std::isinf(l)) throw InputError("softmax: non-finite logit");
    m = std::max(m, l / tau);
  }
  ProbDist out;
  out.p.resize(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.p[i] = std::exp(logits[i] / tau - m);
    s += out.p[i];
  }
  for (double& x : out.p) x /= s;
  return out;
}

/** Ids sorted by (probability desc, id asc). */
inline std::vector<std::size_t> descending_order(const ProbDist& dist) {
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist.p[a] > dist.p[b]; });
  return order;
}

/**
 * Keep the k most probable tokens (ties toward lower ids), renormalize.
 * k >= size is the identity; k == 0 throws ParameterError.
 */
inline ProbDist top_k_filter(const ProbDist& dist, std::size_t k) {
  if (k == 0) throw ParameterError("top-k: k must be >= 1");
  if (k >= dist.size()) return dist;
  auto order = descending_order(dist);
  ProbDist out;
  out.p.assign(dist.size(), 0.0);
  for (std::size_t i = 0; i < k; ++i) out.p[order[i]] = dist.p[order[i]];
  out.renormalize();
  return out;
}

/**
 * Nucleus filter: keep tokens in descending-probability order until the
 * cumulative mass reaches p (the crossing token included), renormalize.
 * p == 1 is the exact identity; p outside (0, 1] throws ParameterError.
 */
inline ProbDist top_p_filter(const ProbDist& dist, double p) {
  if (!(p > 0.0) || p > 1.0) throw ParameterError("top-p: p must be in (0, 1]");
  if (p == 1.0) return dist;
  auto order = descending_order(dist);
  ProbDist out;
  out.p.assign(dist.size(), 0.0);
  double cum = 0.0;
  for (std::size_t i : order) {
    out.p[i] = dist.p[i];
    cum += dist.p[i];
    if (cum >= p) break;
  }
  out.renormalize();
  return out;
}

/**
 * Divide the probability of any candidate that would complete an n-gram
 * already present in history, then renormalize. History shorter than n
 * contains no n-grams, so the transform is the identity there.
 */
inline ProbDist apply_repetition_penalty(const ProbDist& dist, std::span<const TokenId> history,
                                         int n, double penalty) {
  if (n < 1) throw ParameterError("repetition penalty: n must be >= 1");
  if (penalty < 1.0) throw ParameterError("repetition penalty: penalty must be >= 1");
  if (penalty == 1.0) return dist;
  const std::size_t len = history.size();
  if (len < static_cast<std::size_t>(n)) return dist;

  ProbDist out = dist;
  bool touched = false;
  // candidate completes (last n-1 history tokens) + candidate
  const std::size_t ctx = static_cast<std::size_t>(n) - 1;
  for (std::size_t cand = 0; cand < out.p.size(); ++cand) {
    if (out.p[cand] <= 0.0) continue;
    bool repeats = false;
    for (std::size_t start = 0; start + n <= len && !repeats; ++start) {
      bool match = true;
      for (std::size_t j = 0; j < ctx && match; ++j)
        match = history[start + j] == history[len - ctx + j];
      if (match && history[start + ctx] == static_cast<TokenId>(cand)) repeats = true;
    }
    if (repeats) {
      out.p[cand] /= penalty;
      touched = true;
    }
  }
  if (touched) out.renormalize();
  return out;
}

// ============================================================
// Pipeline
// ============================================================

/** Settings for the fixed transform pipeline. */
struct SamplingParams {
  double tau = 1.0;                  // softmax temperature
  std::optional<std::size_t> top_k;  // disabled when empty
  std::optional<double> top_p;       // disabled when empty
  int repetition_n = 3;              // n-gram size for the penalty
  double repetition_penalty = 1.0;   // divisor, 1 disables
};

/** Apply the full pipeline to raw logits given the generation history. */
inline ProbDist transform_logits(std::span<const double> logits, std::span<const TokenId> history,
                                 const SamplingParams& params) {
  ProbDist dist = softmax_with_temperature(logits, params.tau);
  if (params.top_k) dist = top_k_filter(dist, *params.top_k);
  if (params.top_p) dist = top_p_filter(dist, *params.top_p);
  dist = apply_repetition_penalty(dist, history, params.repetition_n, params.repetition_penalty);
  return dist;
}

// ============================================================
// Sampling
// ============================================================

/**
 * Inverse-CDF draw from a distribution. Uses uniform01, so a given rng
 * stream yields the same tokens everywhere.
 */
inline std::size_t sample_index(const ProbDist& dist, std::mt19937_64& rng) {
  if (dist.size() == 0) throw ParameterError("sample: empty distribution");
  double u = uniform01(rng);
  double cum = 0.0;
  std::size_t last_positive = dist.size();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist.p[i] <= 0.0) continue;
    last_positive = i;
    cum += dist.p[i];
    if (u < cum) return i;
  }
  if (last_positive == dist.size()) throw ModelError("sample: distribution has no support");
  return last_positive;  // guard against rounding in the final bucket
}

}  // namespace declab::lm
