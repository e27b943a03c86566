#pragma once

/**
 * text.hpp - answer-text normalization shared by the quality metrics
 * and the rule-based equivalence oracle.
 *
 * normalize_text: lowercase ASCII, punctuation replaced by spaces,
 * whitespace collapsed, and the number words zero..twenty rewritten as
 * digits so "Two" and "2" compare equal. Non-ASCII bytes pass through
 * untouched.
 */

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace declab::eval {

namespace detail {

inline const std::array<std::pair<std::string_view, std::string_view>, 21>& number_words() {
  static const std::array<std::pair<std::string_view, std::string_view>, 21> table{{
      {"zero", "0"},     {"one", "1"},       {"two", "2"},      {"three", "3"},
      {"four", "4"},     {"five", "5"},      {"six", "6"},      {"seven", "7"},
      {"eight", "8"},    {"nine", "9"},      {"ten", "10"},     {"eleven", "11"},
      {"twelve", "12"},  {"thirteen", "13"}, {"fourteen", "14"}, {"fifteen", "15"},
      {"sixteen", "16"}, {"seventeen", "17"}, {"eighteen", "18"}, {"nineteen", "19"},
      {"twenty", "20"},
  }};
  return table;
}

}  // namespace detail

/** Canonical comparison form of an answer string. */
inline std::string normalize_text(std::string_view text) {
  std::string spaced;
  spaced.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c))
      spaced.push_back(' ');
    else
      spaced.push_back(static_cast<char>(std::tolower(c)));
  }

  std::string out;
  out.reserve(spaced.size());
  std::string word;
  auto flush_word = [&] {
    if (word.empty()) return;
    for (const auto& [name, digits] : detail::number_words()) {
      if (word == name) {
        word = digits;
        break;
      }
    }
    if (!out.empty()) out.push_back(' ');
    out += word;
    word.clear();
  };
  for (unsigned char c : spaced) {
    if (std::isspace(c))
      flush_word();
    else
      word.push_back(static_cast<char>(c));
  }
  flush_word();
  return out;
}

/** Tokens of the normalized form. */
inline std::vector<std::string> normalized_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string norm = normalize_text(text);
  std::string word;
  for (char c : norm) {
    if (c == ' ') {
      if (!word.empty()) out.push_back(std::move(word)), word.clear();
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

}  // namespace declab::eval
