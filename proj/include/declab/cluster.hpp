#pragma once

/**
 * cluster.hpp - semantic clustering of sampled answers and the
 * uncertainty quantities computed from it.
 *
 * Clustering is greedy and single-pass: each response is compared
 * against the representative (first member) of each existing cluster in
 * founding order and joins the first bidirectional-entailment match.
 * For a true equivalence oracle this reproduces the transitive-closure
 * partition; for a non-transitive oracle the result is input-order
 * dependent but always a valid partition.
 *
 * All entropies are natural-log, with 0 * ln 0 = 0.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "declab/common.hpp"
#include "declab/entail.hpp"
#include "declab/record.hpp"

namespace declab::semantic {

// ============================================================
// Clustering
// ============================================================

/** Partition of response indexes 0..N-1, clusters in founding order. */
struct SemanticClustering {
  std::vector<std::vector<std::size_t>> clusters;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& c : clusters) n += c.size();
    return n;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out;
    out.reserve(clusters.size());
    for (const auto& c : clusters) out.push_back(c.size());
    return out;
  }

  /** Throws InputError unless clusters form a partition of 0..N-1. */
  void validate() const {
    const std::size_t n = total();
    std::vector<bool> seen(n, false);
    for (const auto& c : clusters) {
      if (c.empty()) throw InputError("clustering: empty cluster");
      for (std::size_t i : c) {
        if (i >= n || seen[i]) throw InputError("clustering: not a partition");
        seen[i] = true;
      }
    }
  }
};

/** Greedy single-pass clustering of responses. N must be >= 1. */
inline SemanticClustering cluster_semantic(EquivalenceOracle& oracle,
                                           std::span<const std::string> responses) {
  if (responses.empty()) throw ParameterError("clustering: need at least one response");
  SemanticClustering out;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    bool placed = false;
    for (auto& cluster : out.clusters) {
      const std::string& representative = responses[cluster.front()];
      if (bidirectional_entail(oracle, responses[i], representative)) {
        cluster.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) out.clusters.push_back({i});
  }
  return out;
}

// ============================================================
// Cluster mass
// ============================================================

/**
 * Per-cluster probability mass: sum of exp(log prob) over members,
 * renormalized across clusters. Log-sum-exp is used per cluster so very
 * negative log probs stay stable. Throws InputError when every sequence
 * has zero probability.
 */
inline std::vector<double> cluster_probability(const SemanticClustering& clustering,
                                               std::span<const double> seq_log_probs) {
  if (clustering.total() != seq_log_probs.size())
    throw ParameterError("cluster mass: log prob count must match clustered responses");
  double global_max = -std::numeric_limits<double>::infinity();
  for (double lp : seq_log_probs) global_max = std::max(global_max, lp);
  if (std::isinf(global_max))
    throw InputError("cluster mass: all sequence probabilities are zero");

  std::vector<double> mass(clustering.clusters.size(), 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    for (std::size_t i : clustering.clusters[c]) {
      const double lp = seq_log_probs[i];
      if (!std::isinf(lp)) mass[c] += std::exp(lp - global_max);
    }
    total += mass[c];
  }
  for (double& m : mass) m /= total;
  return mass;
}

// ============================================================
// Entropies
// ============================================================

namespace detail {

inline double shannon_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace detail

enum class PredictiveEntropyMode { McLengthNormalized, RenormalizedDiscrete };
enum class SemanticEntropyMode { ProbabilityWeighted, ClusterAssignment };

/**
 * Predictive entropy of a sample of generations.
 *   McLengthNormalized     Monte Carlo estimate with per-token length
 *                          normalization: -(1/N) * sum(log p(s) / |s|).
 *   RenormalizedDiscrete   Shannon entropy of the sequence probabilities
 *                          renormalized over the deduplicated sample.
 * Records must be non-empty with finite log probs.
 */
inline double predictive_entropy(std::span<const decode::GenerationRecord> records,
                                 PredictiveEntropyMode mode) {
  if (records.empty()) throw ParameterError("predictive entropy: need at least one record");
  for (const auto& r : records) {
    if (r.tokens.empty()) throw InputError("predictive entropy: empty generation");
    if (std::isinf(r.total_log_prob()) || std::isnan(r.total_log_prob()))
      throw InputError("predictive entropy: non-finite sequence log prob");
  }

  if (mode == PredictiveEntropyMode::McLengthNormalized) {
    double acc = 0.0;
    for (const auto& r : records)
      acc += r.total_log_prob() / static_cast<double>(r.tokens.size());
    return -acc / static_cast<double>(records.size());
  }

  std::map<std::vector<lm::TokenId>, double> dedup;
  for (const auto& r : records) dedup.emplace(r.tokens, r.total_log_prob());
  double max_lp = -std::numeric_limits<double>::infinity();
  for (const auto& [seq, lp] : dedup) max_lp = std::max(max_lp, lp);
  std::vector<double> probs;
  probs.reserve(dedup.size());
  double total = 0.0;
  for (const auto& [seq, lp] : dedup) {
    probs.push_back(std::exp(lp - max_lp));
    total += probs.back();
  }
  for (double& p : probs) p /= total;
  return detail::shannon_entropy(probs);
}

/**
 * Semantic entropy over a clustering.
 *   ProbabilityWeighted  entropy of the renormalized cluster masses;
 *   ClusterAssignment    entropy of cluster sizes / N.
 */
inline double semantic_entropy(const SemanticClustering& clustering,
                               std::span<const double> seq_log_probs, SemanticEntropyMode mode) {
  if (clustering.clusters.empty()) throw ParameterError("semantic entropy: empty clustering");
  if (mode == SemanticEntropyMode::ProbabilityWeighted) {
    std::vector<double> mass = cluster_probability(clustering, seq_log_probs);
    return detail::shannon_entropy(mass);
  }
  const double n = static_cast<double>(clustering.total());
  std::vector<double> probs;
  probs.reserve(clustering.clusters.size());
  for (const auto& c : clustering.clusters) probs.push_back(static_cast<double>(c.size()) / n);
  return detail::shannon_entropy(probs);
}

// ============================================================
// Agreement and diversity
// ============================================================

/** Number of clusters over number of responses, in (0, 1]. */
inline double semantic_agreement(const SemanticClustering& clustering) {
  const std::size_t n = clustering.total();
  if (n == 0) throw ParameterError("semantic agreement: empty clustering");
  return static_cast<double>(clustering.clusters.size()) / static_cast<double>(n);
}

/** Fraction of unordered response pairs that land in different clusters. */
inline double response_diversity(const SemanticClustering& clustering) {
  const std::size_t n = clustering.total();
  if (n < 2) throw ParameterError("response diversity: need at least two responses");
  double same = 0.0;
  for (const auto& c : clustering.clusters)
    same += static_cast<double>(c.size()) * static_cast<double>(c.size() - 1) / 2.0;
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return 1.0 - same / pairs;
}

// ============================================================
// Report
// ============================================================

/** Per-prompt uncertainty summary. */
struct UncertaintyReport {
  double predictive_entropy = 0.0;
  double semantic_entropy = 0.0;
  std::size_t num_clusters = 0;
  std::vector<std::size_t> cluster_sizes;
  double semantic_agreement = 0.0;
  double response_diversity = 0.0;  // NaN when N < 2
};

inline UncertaintyReport uncertainty_report(std::span<const decode::GenerationRecord> records,
                                            const SemanticClustering& clustering,
                                            PredictiveEntropyMode pe_mode,
                                            SemanticEntropyMode se_mode) {
  std::vector<double> lps;
  lps.reserve(records.size());
  for (const auto& r : records) lps.push_back(r.total_log_prob());
  UncertaintyReport out;
  out.predictive_entropy = predictive_entropy(records, pe_mode);
  out.semantic_entropy = semantic_entropy(clustering, lps, se_mode);
  out.num_clusters = clustering.clusters.size();
  out.cluster_sizes = clustering.sizes();
  out.semantic_agreement = semantic_agreement(clustering);
  out.response_diversity = records.size() < 2 ? std::numeric_limits<double>::quiet_NaN()
                                              : response_diversity(clustering);
  return out;
}

}  // namespace declab::semantic
