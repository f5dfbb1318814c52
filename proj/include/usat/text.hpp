#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace usat {

namespace detail {
inline bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
}  // namespace detail

/// Lowercases ASCII and splits on whitespace and punctuation. A hyphen joining
/// two word characters stays inside the token ("sci-fi"); every other
/// punctuation byte is a separator ("don't" -> don, t). Bytes >= 0x80 are
/// treated as word characters.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (detail::is_word_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '-' && !current.empty() && i + 1 < text.size() &&
               detail::is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
      current.push_back('-');
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// |A ∩ B| / |A ∪ B| over token sets; 0 when both are empty.
inline double jaccard(std::span<const std::string> a, std::span<const std::string> b) {
  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  const std::size_t uni = sa.size() + sb.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

/// Apology/negation phrases, each stored tokenized.
class Lexicon {
 public:
  Lexicon() = default;

  explicit Lexicon(std::span<const std::string> phrases) {
    for (const auto& p : phrases) add(p);
  }

  void add(std::string_view phrase) {
    auto tokens = tokenize(phrase);
    if (!tokens.empty()) phrases_.push_back(std::move(tokens));
  }

  /// One phrase per line; blank lines and lines starting with '#' are ignored.
  static Lexicon read(std::istream& in) {
    Lexicon lex;
    std::string line;
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      lex.add(line);
    }
    return lex;
  }

  /// True iff some phrase is a contiguous subsequence of `tokens`.
  bool matches(std::span<const std::string> tokens) const {
    for (const auto& phrase : phrases_) {
      if (std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end()) != tokens.end())
        return true;
    }
    return false;
  }

  std::size_t size() const { return phrases_.size(); }
  const std::vector<std::vector<std::string>>& phrases() const { return phrases_; }

 private:
  std::vector<std::vector<std::string>> phrases_;
};

/// Phrases shipped in data/unactionable_lexicon.txt.
inline const std::vector<std::string>& default_lexicon_phrases() {
  static const std::vector<std::string> phrases = {
      "sorry i don t know", "i can t help with", "i didn t understand", "i m not sure",
      "i don t know how",   "sorry i can t",     "i m unable to",       "i couldn t find",
      "i can t find",       "sorry i didn t",
  };
  return phrases;
}

inline Lexicon default_lexicon() { return Lexicon(default_lexicon_phrases()); }

/// 1 iff the tokenized response contains a lexicon phrase.
inline double unactionable_flag(std::string_view system_response, const Lexicon& lexicon) {
  const auto tokens = tokenize(system_response);
  return lexicon.matches(tokens) ? 1.0 : 0.0;
}

}  // namespace usat
