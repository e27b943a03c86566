#pragma once

/**
 * vocab.hpp - token ids, vocabularies, and toy tokenization.
 *
 * Tokenization is deliberately simple: lowercase, split on whitespace.
 * A Vocabulary owns the surface list, reserves "</s>" as the
 * end-of-sequence marker, and tracks which ids act as stop tokens
 * (end-of-sequence, period, newline, plus any registered extras).
 */

#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "declab/common.hpp"

namespace declab::lm {

using TokenId = std::int32_t;

inline constexpr std::string_view kEosSurface = "</s>";

/** Lowercase ASCII copy of a string view. */
inline std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

/** Split on runs of whitespace; no empty pieces. */
inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/**
 * Ordered list of distinct token surfaces with stop-token bookkeeping.
 * Ids are dense indexes into the surface list.
 */
class Vocabulary {
 public:
  Vocabulary() = default;

  /** Throws InputError on duplicate or empty surfaces. */
  explicit Vocabulary(std::vector<std::string> tokens) : surfaces_(std::move(tokens)) {
    index_.reserve(surfaces_.size());
    for (std::size_t i = 0; i < surfaces_.size(); ++i) {
      if (surfaces_[i].empty()) throw InputError("vocabulary: empty token surface");
      auto [it, inserted] = index_.emplace(surfaces_[i], static_cast<TokenId>(i));
      if (!inserted) throw InputError("vocabulary: duplicate token surface '" + surfaces_[i] + "'");
    }
    for (std::string_view s : {kEosSurface, std::string_view("."), std::string_view("\n")}) {
      if (auto id = find(s)) stops_.insert(*id);
    }
    if (auto id = find(kEosSurface)) eos_ = *id;
  }

  std::size_t size() const { return surfaces_.size(); }

  const std::string& surface(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= surfaces_.size())
      throw ParameterError("vocabulary: token id out of range");
    return surfaces_[static_cast<std::size_t>(id)];
  }

  std::optional<TokenId> find(std::string_view s) const {
    auto it = index_.find(std::string(s));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  TokenId require(std::string_view s) const {
    auto id = find(s);
    if (!id) throw InputError("vocabulary: unknown token '" + std::string(s) + "'");
    return *id;
  }

  std::optional<TokenId> eos() const { return eos_; }

  bool is_stop(TokenId id) const { return stops_.count(id) > 0; }

  /** Register an additional stop surface (must already be in the vocabulary). */
  void add_stop(std::string_view s) { stops_.insert(require(s)); }

  /**
   * Lowercase + whitespace tokenization against this vocabulary.
   * Throws InputError on a token with no id.
   */
  std::vector<TokenId> tokenize(std::string_view text) const {
    std::vector<TokenId> out;
    for (const auto& piece : split_ws(to_lower(text))) out.push_back(require(piece));
    return out;
  }

  /** Join surfaces with single spaces, skipping the end-of-sequence marker. */
  std::string detokenize(std::span<const TokenId> tokens) const {
    std::string out;
    for (TokenId t : tokens) {
      const std::string& s = surface(t);
      if (s == kEosSurface) continue;
      if (!out.empty()) out.push_back(' ');
      out += s;
    }
    return out;
  }

  bool operator==(const Vocabulary& other) const { return surfaces_ == other.surfaces_; }

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> index_;
  std::unordered_set<TokenId> stops_;
  std::optional<TokenId> eos_;
};

}  // namespace declab::lm
