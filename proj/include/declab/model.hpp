#pragma once

/**
 * model.hpp - the autoregressive model interface and the two toy
 * backends used throughout: an explicit tabular Markov model and an
 * additively smoothed n-gram model trained from a text corpus.
 *
 * Models are immutable after construction and safe to share across
 * threads. ContextCursor is the incremental-context seam: a neural
 * backend would keep its KV state behind it, the tabular backends just
 * replay the stored context, which costs nothing at this scale.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "declab/common.hpp"
#include "declab/prob.hpp"
#include "declab/vocab.hpp"

namespace declab::lm {

// ============================================================
// Interface
// ============================================================

/**
 * Deterministic next-token scorer: same context, same logits, always.
 * Implementations must return exactly vocab().size() finite logits.
 */
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;
  virtual const Vocabulary& vocab() const = 0;
  virtual std::vector<double> next_logits(std::span<const TokenId> context) const = 0;
};

/** Transformed next-token distribution at the end of a context. */
inline ProbDist next_token_dist(const SequenceModel& model, std::span<const TokenId> context,
                                const SamplingParams& params) {
  return transform_logits(model.next_logits(context), context, params);
}

/**
 * Incremental context over a model. push/truncate maintain the token
 * prefix; dist() evaluates the transform pipeline at the current end.
 */
class ContextCursor {
 public:
  ContextCursor(const SequenceModel& model, std::vector<TokenId> initial)
      : model_(&model), tokens_(std::move(initial)) {}

  void push(TokenId t) { tokens_.push_back(t); }

  void truncate(std::size_t n) {
    if (n > tokens_.size()) throw ParameterError("cursor: truncate beyond current length");
    tokens_.resize(n);
  }

  std::size_t size() const { return tokens_.size(); }
  std::span<const TokenId> context() const { return tokens_; }
  const SequenceModel& model() const { return *model_; }

  std::vector<double> logits() const { return model_->next_logits(tokens_); }

  ProbDist dist(const SamplingParams& params) const {
    return next_token_dist(*model_, tokens_, params);
  }

 private:
  const SequenceModel* model_;
  std::vector<TokenId> tokens_;
};

// ============================================================
// Tabular Markov model
// ============================================================

/**
 * Order-k Markov model backed by an explicit table. The row key is the
 * last min(order, |context|) tokens, so short prefixes own their own
 * rows. Querying a context without a row throws ModelError.
 */
class TabularMarkovModel final : public SequenceModel {
 public:
  TabularMarkovModel(Vocabulary vocab, int order) : vocab_(std::move(vocab)), order_(order) {
    if (order_ < 0) throw ParameterError("tabular model: order must be >= 0");
    if (vocab_.size() == 0) throw ParameterError("tabular model: empty vocabulary");
  }

  int order() const { return order_; }
  const Vocabulary& vocab() const override { return vocab_; }

  /** Install the row for one context window (at most `order` tokens). */
  void set_row(std::span<const TokenId> window, std::vector<double> logits) {
    if (window.size() > static_cast<std::size_t>(order_))
      throw ParameterError("tabular model: context window longer than order");
    if (logits.size() != vocab_.size())
      throw ParameterError("tabular model: row width must equal vocabulary size");
    for (double l : logits)
      if (std::isnan(l) || std::isinf(l)) throw InputError("tabular model: non-finite logit");
    for (TokenId t : window) vocab_.surface(t);  // bounds check
    rows_[std::vector<TokenId>(window.begin(), window.end())] = std::move(logits);
  }

  std::vector<double> next_logits(std::span<const TokenId> context) const override {
    const std::size_t k = std::min(context.size(), static_cast<std::size_t>(order_));
    std::vector<TokenId> key(context.end() - k, context.end());
    auto it = rows_.find(key);
    if (it == rows_.end())
      throw ModelError("tabular model: no row for context '" + vocab_.detokenize(key) + "'");
    return it->second;
  }

  const std::map<std::vector<TokenId>, std::vector<double>>& rows() const { return rows_; }

 private:
  Vocabulary vocab_;
  int order_;
  std::map<std::vector<TokenId>, std::vector<double>> rows_;
};

// ============================================================
// N-gram model
// ============================================================

/**
 * Additively smoothed n-gram model. Conditionals are
 *   p(w | ctx) = (count(ctx,w) + a) / (count(ctx) + a * V)
 * with contexts of every length 0..n-1 counted, so an unseen context
 * falls back to the uniform distribution.
 */
class NgramModel final : public SequenceModel {
 public:
  NgramModel(Vocabulary vocab, int n, double smoothing,
             std::map<std::vector<TokenId>, std::map<TokenId, long>> counts)
      : vocab_(std::move(vocab)), n_(n), smoothing_(smoothing), counts_(std::move(counts)) {
    for (const auto& [ctx, nexts] : counts_) {
      long total = 0;
      for (const auto& [tok, c] : nexts) total += c;
      totals_[ctx] = total;
    }
  }

  int n() const { return n_; }
  double smoothing() const { return smoothing_; }
  const Vocabulary& vocab() const override { return vocab_; }

  std::vector<double> next_logits(std::span<const TokenId> context) const override {
    const std::size_t k =
        std::min(context.size(), static_cast<std::size_t>(n_ > 0 ? n_ - 1 : 0));
    std::vector<TokenId> key(context.end() - k, context.end());
    const double v = static_cast<double>(vocab_.size());
    auto totals_it = totals_.find(key);
    const double total = totals_it == totals_.end() ? 0.0 : static_cast<double>(totals_it->second);
    const auto counts_it = counts_.find(key);
    std::vector<double> logits(vocab_.size());
    for (std::size_t t = 0; t < vocab_.size(); ++t) {
      double c = 0.0;
      if (counts_it != counts_.end()) {
        auto jt = counts_it->second.find(static_cast<TokenId>(t));
        if (jt != counts_it->second.end()) c = static_cast<double>(jt->second);
      }
      logits[t] = std::log((c + smoothing_) / (total + smoothing_ * v));
    }
    return logits;
  }

 private:
  Vocabulary vocab_;
  int n_;
  double smoothing_;
  std::map<std::vector<TokenId>, std::map<TokenId, long>> counts_;
  std::map<std::vector<TokenId>, long> totals_;
};

/**
 * Train an n-gram model from raw text (lowercased, whitespace split).
 * The vocabulary is the distinct tokens in first-appearance order.
 * Throws InputError on an empty corpus, ParameterError on bad n/smoothing.
 */
inline NgramModel train_ngram(std::string_view corpus, int n, double smoothing) {
  if (n < 1) throw ParameterError("train_ngram: n must be >= 1");
  if (!(smoothing > 0.0)) throw ParameterError("train_ngram: smoothing must be > 0");
  auto pieces = split_ws(to_lower(corpus));
  if (pieces.empty()) throw InputError("train_ngram: empty corpus");

  std::vector<std::string> surfaces;
  std::map<std::string, TokenId> seen;
  std::vector<TokenId> stream;
  stream.reserve(pieces.size());
  for (auto& piece : pieces) {
    auto it = seen.find(piece);
    if (it == seen.end()) {
      it = seen.emplace(piece, static_cast<TokenId>(surfaces.size())).first;
      surfaces.push_back(piece);
    }
    stream.push_back(it->second);
  }

  std::map<std::vector<TokenId>, std::map<TokenId, long>> counts;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const std::size_t max_ctx = std::min<std::size_t>(static_cast<std::size_t>(n - 1), i);
    for (std::size_t len = 0; len <= max_ctx; ++len) {
      std::vector<TokenId> ctx(stream.begin() + (i - len), stream.begin() + i);
      counts[ctx][stream[i]] += 1;
    }
  }
  return NgramModel(Vocabulary(std::move(surfaces)), n, smoothing, std::move(counts));
}

// ============================================================
// Scoring
// ============================================================

/** Sum of per-token log probabilities under the transform pipeline. */
struct SequenceScore {
  double log_prob = 0.0;
  bool impossible = false;  // some token had zero post-filter probability
};

/**
 * Score `sequence` as a continuation of `prompt` with the same pipeline
 * the decoders use, so decoder records and rescoring always agree.
 */
inline SequenceScore sequence_log_prob(const SequenceModel& model, std::span<const TokenId> prompt,
                                       std::span<const TokenId> sequence,
                                       const SamplingParams& params) {
  SequenceScore score;
  std::vector<TokenId> ctx(prompt.begin(), prompt.end());
  for (TokenId t : sequence) {
    model.vocab().surface(t);  // bounds check
    ProbDist dist = next_token_dist(model, ctx, params);
    const double pt = dist.p[static_cast<std::size_t>(t)];
    if (pt <= 0.0) {
      score.log_prob = -std::numeric_limits<double>::infinity();
      score.impossible = true;
      return score;
    }
    score.log_prob += std::log(pt);
    ctx.push_back(t);
  }
  return score;
}

/** Length-normalized ranking score: log_prob / |s|^alpha. */
inline double length_penalized_score(double log_prob, std::size_t length, double alpha) {
  if (length == 0) throw ParameterError("length penalty: empty sequence");
  return log_prob / std::pow(static_cast<double>(length), alpha);
}

// ============================================================
// Table file IO
// ============================================================

/**
 * Plain-text table format, one row per context:
 *
 *   # comment
 *   vocab<TAB>a b c </s>
 *   order<TAB>1
 *   <TAB>0.0 0.1 0.2 0.3        (empty-context row)
 *   a<TAB>1.0 0.5 -0.2 0.0
 *
 * Logits round-trip exactly (written with 17 significant digits).
 */
inline void save_tabular(const TabularMarkovModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("save_tabular: cannot open '" + path.string() + "' for writing");
  const Vocabulary& v = model.vocab();
  out << "vocab\t";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << v.surface(static_cast<TokenId>(i));
  }
  out << "\norder\t" << model.order() << "\n";
  char buf[64];
  for (const auto& [ctx, logits] : model.rows()) {
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      if (i) out << ' ';
      out << v.surface(ctx[i]);
    }
    out << '\t';
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (i) out << ' ';
      std::snprintf(buf, sizeof buf, "%.17g", logits[i]);
      out << buf;
    }
    out << '\n';
  }
}

inline TabularMarkovModel load_tabular(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("load_tabular: cannot open '" + path.string() + "'");
  std::string line;
  int line_no = 0;
  auto next_content_line = [&](std::string& out_line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      out_line = line;
      return true;
    }
    return false;
  };

  auto fail = [&](const std::string& what) {
    throw InputError("load_tabular: " + path.string() + ":" + std::to_string(line_no) + ": " + what);
  };

  std::string header;
  if (!next_content_line(header) || header.rfind("vocab\t", 0) != 0) fail("expected 'vocab<TAB>...' header");
  Vocabulary vocab(split_ws(header.substr(6)));

  if (!next_content_line(header) || header.rfind("order\t", 0) != 0) fail("expected 'order<TAB>...' header");
  int order = 0;
  try {
    order = std::stoi(header.substr(6));
  } catch (const std::exception&) {
    fail("order is not an integer");
  }

  TabularMarkovModel model(vocab, order);
  std::string row;
  while (next_content_line(row)) {
    auto tab = row.find('\t');
    if (tab == std::string::npos) fail("row line has no tab separator");
    std::vector<TokenId> ctx;
    for (const auto& s : split_ws(row.substr(0, tab))) ctx.push_back(vocab.require(s));
    std::vector<double> logits;
    for (const auto& s : split_ws(row.substr(tab + 1))) {
      try {
        logits.push_back(std::stod(s));
      } catch (const std::exception&) {
        fail("bad logit value '" + s + "'");
      }
    }
    try {
      model.set_row(ctx, std::move(logits));
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  if (model.rows().empty()) fail("table has no rows");
  return model;
}

}  // namespace declab::lm
