#pragma once

/**
 * entail.hpp - entailment verdicts and the equivalence oracle seam.
 *
 * An EquivalenceOracle judges the ordered pair (premise, hypothesis).
 * Semantic clustering treats two answers as equivalent only when both
 * directions come back as entailment. The rule-based oracle bundled
 * here is deliberately blunt (string tiers over normalized text); a
 * remote NLI service can be dropped in behind the same interface.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <string_view>

#include "declab/common.hpp"
#include "declab/text.hpp"

namespace declab::semantic {

// ============================================================
// Verdicts
// ============================================================

enum class EntailmentLabel { Contradiction = 0, Neutral = 1, Entailment = 2 };

inline std::string_view to_string(EntailmentLabel l) {
  switch (l) {
    case EntailmentLabel::Contradiction: return "contradiction";
    case EntailmentLabel::Neutral: return "neutral";
    case EntailmentLabel::Entailment: return "entailment";
  }
  return "unknown";
}

/** Label plus normalized class scores in (contradiction, neutral, entailment) order. */
struct EntailmentVerdict {
  EntailmentLabel label = EntailmentLabel::Neutral;
  std::array<double, 3> class_scores{0.0, 1.0, 0.0};

  /** Build from raw scores: renormalize, argmax (ties toward the lower label). */
  static EntailmentVerdict from_scores(std::array<double, 3> scores) {
    double s = scores[0] + scores[1] + scores[2];
    if (!(s > 0.0)) throw InputError("verdict: class scores must have positive mass");
    for (double& x : scores) {
      if (std::isnan(x) || x < 0.0) throw InputError("verdict: class scores must be >= 0");
      x /= s;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i)
      if (scores[i] > scores[best]) best = i;
    return EntailmentVerdict{static_cast<EntailmentLabel>(best), scores};
  }

  void validate() const {
    double s = class_scores[0] + class_scores[1] + class_scores[2];
    if (std::abs(s - 1.0) > 1e-6) throw InputError("verdict: class scores must sum to 1");
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i)
      if (class_scores[i] > class_scores[best]) best = i;
    if (static_cast<EntailmentLabel>(best) != label)
      throw InputError("verdict: label must be the argmax class");
  }
};

// ============================================================
// Oracle seam
// ============================================================

/** Deterministic judge of ordered (premise, hypothesis) pairs. */
class EquivalenceOracle {
 public:
  virtual ~EquivalenceOracle() = default;
  virtual EntailmentVerdict judge(const std::string& premise, const std::string& hypothesis) = 0;
};

/** True only when both directions are judged entailment. */
inline bool bidirectional_entail(EquivalenceOracle& oracle, const std::string& a,
                                 const std::string& b) {
  if (oracle.judge(a, b).label != EntailmentLabel::Entailment) return false;
  return oracle.judge(b, a).label == EntailmentLabel::Entailment;
}

// ============================================================
// Rule-based oracle
// ============================================================

/**
 * Tiered string rules over normalized text:
 *   entailment    equal normalized forms, or one side's token set is a
 *                 subset of the other's (both non-empty);
 *   neutral       token-set Jaccard similarity above 0.5;
 *   contradiction everything else.
 * Exact one-hot class scores keep verdicts trivially valid.
 */
inline EntailmentVerdict rule_based_verdict(std::string_view premise, std::string_view hypothesis) {
  auto one_hot = [](EntailmentLabel l) {
    EntailmentVerdict v;
    v.label = l;
    v.class_scores = {0.0, 0.0, 0.0};
    v.class_scores[static_cast<std::size_t>(l)] = 1.0;
    return v;
  };

  const std::string na = eval::normalize_text(premise);
  const std::string nb = eval::normalize_text(hypothesis);
  if (na == nb) return one_hot(EntailmentLabel::Entailment);

  auto ta_vec = eval::normalized_tokens(premise);
  auto tb_vec = eval::normalized_tokens(hypothesis);
  std::set<std::string> ta(ta_vec.begin(), ta_vec.end());
  std::set<std::string> tb(tb_vec.begin(), tb_vec.end());

  if (!ta.empty() && !tb.empty()) {
    auto subset = [](const std::set<std::string>& small, const std::set<std::string>& big) {
      return std::includes(big.begin(), big.end(), small.begin(), small.end());
    };
    if (subset(ta, tb) || subset(tb, ta)) return one_hot(EntailmentLabel::Entailment);
  }

  std::size_t inter = 0;
  for (const auto& t : ta) inter += tb.count(t);
  const std::size_t uni = ta.size() + tb.size() - inter;
  const double jaccard = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  if (jaccard > 0.5) return one_hot(EntailmentLabel::Neutral);
  return one_hot(EntailmentLabel::Contradiction);
}

class RuleBasedOracle final : public EquivalenceOracle {
 public:
  EntailmentVerdict judge(const std::string& premise, const std::string& hypothesis) override {
    return rule_based_verdict(premise, hypothesis);
  }
};

}  // namespace declab::semantic
