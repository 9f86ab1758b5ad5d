// SPDX-License-Identifier: Apache-2.0
//
// Pre- and post-processing around the code generator: stopword filtering,
// tokenizers for intents and code, and the var# standardization of intents.
#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "poisonkit/error.hpp"
#include "poisonkit/text.hpp"

namespace poisonkit::nlpipe {

enum class TokenKind { NL, CODE };

struct TokenSeq {
  std::vector<std::string> tokens;
  TokenKind kind = TokenKind::NL;
  std::vector<std::string> warnings;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens[i]; }
};

// ---------------------------------------------------------------------------
// Stopwords

class Stoplist {
 public:
  Stoplist() = default;
  Stoplist(std::set<std::string> words, std::string version)
      : words_(std::move(words)), version_(std::move(version)) {}

  // One lowercase word per line. '#' starts a comment; a "# version: X" line
  // sets the list version. Blank lines are ignored.
  static Stoplist parse(std::string_view content) {
    std::set<std::string> words;
    std::string version = "unversioned";
    for (auto raw : text::lines(content)) {
      auto line = text::trim(raw);
      if (line.empty()) continue;
      if (line.front() == '#') {
        auto body = text::trim(line.substr(1));
        constexpr std::string_view key = "version:";
        if (body.substr(0, key.size()) == key) version = std::string(text::trim(body.substr(key.size())));
        continue;
      }
      if (line.find_first_of(" \t") != std::string_view::npos)
        throw ConfigError("stopword entry contains whitespace: '" + std::string(line) + "'");
      words.insert(text::to_lower(line));
    }
    return Stoplist(std::move(words), std::move(version));
  }

  static Stoplist load(const std::string& path) { return parse(text::read_file(path)); }

  bool contains_word(std::string_view word) const { return words_.count(text::to_lower(word)) != 0; }
  const std::set<std::string>& words() const { return words_; }
  const std::string& version() const { return version_; }

 private:
  std::set<std::string> words_;
  std::string version_ = "unversioned";
};

inline constexpr std::string_view kDefaultStoplistText = R"(# Default stopword list for intent pre-processing.
# version: 1
a
an
the
each
every
onto
into
of
its
this
that
these
those
some
then
please
)";

inline const Stoplist& default_stoplist() {
  static const Stoplist list = Stoplist::parse(kDefaultStoplistText);
  return list;
}

// Removes whole whitespace-delimited words found in the stoplist (case
// insensitive) and joins the survivors with single spaces.
inline std::string filter_stopwords(std::string_view intent, const Stoplist& stoplist) {
  std::vector<std::string> kept;
  for (auto& w : text::split_ws(intent))
    if (!stoplist.contains_word(w)) kept.push_back(std::move(w));
  return text::join(kept, " ");
}

// ---------------------------------------------------------------------------
// Natural-language tokenizer

namespace detail {

inline bool is_quote(char c) { return c == '\'' || c == '"' || c == '`'; }

inline bool is_hard_punct(char c) {
  switch (c) {
    case ',': case ';': case '!': case '?': case '(': case ')':
    case '[': case ']': case '{': case '}': case '"': case '`':
      return true;
    default:
      return false;
  }
}

inline bool is_trailing_punct(char c) {
  return c == '.' || c == ':' || c == '\'' || c == '-';
}

}  // namespace detail

// Splits an intent into words and punctuation. A quote that opens at a word
// boundary and has a matching close quote yields one token for the whole span.
inline TokenSeq tokenize_nl(std::string_view s) {
  TokenSeq out;
  out.kind = TokenKind::NL;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    char c = s[i];
    if (text::is_space(c)) {
      ++i;
      continue;
    }
    if (detail::is_quote(c)) {
      std::size_t close = s.find(c, i + 1);
      if (close != std::string_view::npos) {
        out.tokens.emplace_back(s.substr(i, close - i + 1));
        i = close + 1;
      } else {
        out.warnings.push_back("unbalanced quote at offset " + std::to_string(i) + ", treated literally");
        out.tokens.emplace_back(1, c);
        ++i;
      }
      continue;
    }
    if (detail::is_hard_punct(c)) {
      out.tokens.emplace_back(1, c);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !text::is_space(s[j]) && !detail::is_hard_punct(s[j])) ++j;
    std::string_view word = s.substr(i, j - i);
    std::vector<std::string> trailing;
    while (word.size() > 1 && detail::is_trailing_punct(word.back())) {
      trailing.emplace_back(1, word.back());
      word.remove_suffix(1);
    }
    out.tokens.emplace_back(word);
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) out.tokens.push_back(*it);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Code tokenizer (Python-flavoured, total on arbitrary input)

namespace detail {

inline bool ident_start(unsigned char c) { return c == '_' || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c >= 0x80; }
inline bool ident_char(unsigned char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
inline bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

inline bool string_prefix(std::string_view p) {
  if (p.empty() || p.size() > 2) return false;
  std::string lower = text::to_lower(p);
  static const char* ok[] = {"r", "b", "u", "f", "br", "rb", "fr", "rf"};
  for (auto* k : ok)
    if (lower == k) return true;
  return false;
}

inline constexpr std::string_view kOperators[] = {
    "**=", "//=", ">>=", "<<=", "...", "!=", "==", "<=", ">=", "**", "//", "->", "+=", "-=",
    "*=",  "/=",  "%=",  "&=",  "|=",  "^=", "@=", ":=", "<<", ">>",
};

// Scans a string literal starting at the opening quote. Returns the end offset
// (one past the closing quote) or npos when the literal is unterminated.
inline std::size_t scan_string(std::string_view s, std::size_t quote_pos) {
  char q = s[quote_pos];
  bool triple = quote_pos + 2 < s.size() && s[quote_pos + 1] == q && s[quote_pos + 2] == q;
  std::size_t i = quote_pos + (triple ? 3 : 1);
  while (i < s.size()) {
    char c = s[i];
    if (c == '\\') {
      i += 2;
      continue;
    }
    if (!triple && c == '\n') return std::string_view::npos;
    if (c == q) {
      if (!triple) return i + 1;
      if (i + 2 < s.size() && s[i + 1] == q && s[i + 2] == q) return i + 3;
    }
    ++i;
  }
  return std::string_view::npos;
}

}  // namespace detail

// Lexes a code fragment into identifiers, literals, operators and punctuation.
// Comments and whitespace are dropped. Never fails: an unterminated string
// becomes one token running to the end of its line, and any byte the lexer does
// not recognise becomes a single-character token.
inline TokenSeq tokenize_code(std::string_view s) {
  TokenSeq out;
  out.kind = TokenKind::CODE;
  std::size_t i = 0;
  const std::size_t n = s.size();
  auto emit = [&](std::size_t from, std::size_t to) { out.tokens.emplace_back(s.substr(from, to - from)); };

  while (i < n) {
    auto c = static_cast<unsigned char>(s[i]);
    if (text::is_space(static_cast<char>(c)) || (c == '\\' && i + 1 < n && s[i + 1] == '\n')) {
      i += (c == '\\') ? 2 : 1;
      continue;
    }
    if (c == '#') {
      while (i < n && s[i] != '\n') ++i;
      continue;
    }
    if (detail::ident_start(c)) {
      std::size_t j = i;
      while (j < n && detail::ident_char(static_cast<unsigned char>(s[j]))) ++j;
      if (j < n && (s[j] == '\'' || s[j] == '"') && detail::string_prefix(s.substr(i, j - i))) {
        std::size_t end = detail::scan_string(s, j);
        if (end == std::string_view::npos) {
          std::size_t eol = s.find('\n', j);
          end = eol == std::string_view::npos ? n : eol;
          out.warnings.push_back("unterminated string at offset " + std::to_string(i));
        }
        emit(i, end);
        i = end;
        continue;
      }
      emit(i, j);
      i = j;
      continue;
    }
    if (c == '\'' || c == '"') {
      std::size_t end = detail::scan_string(s, i);
      if (end == std::string_view::npos) {
        std::size_t eol = s.find('\n', i);
        end = eol == std::string_view::npos ? n : eol;
        out.warnings.push_back("unterminated string at offset " + std::to_string(i));
      }
      emit(i, end);
      i = end;
      continue;
    }
    if (detail::is_digit(c) || (c == '.' && i + 1 < n && detail::is_digit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i + 1;
      while (j < n) {
        auto d = static_cast<unsigned char>(s[j]);
        if (detail::ident_char(d) || d == '.') {
          ++j;
        } else if ((d == '+' || d == '-') && (s[j - 1] == 'e' || s[j - 1] == 'E') &&
                   !(j >= i + 2 && (s[i + 1] == 'x' || s[i + 1] == 'X'))) {
          ++j;
        } else {
          break;
        }
      }
      emit(i, j);
      i = j;
      continue;
    }
    bool matched = false;
    for (auto op : detail::kOperators) {
      if (s.substr(i, op.size()) == op) {
        emit(i, i + op.size());
        i += op.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    emit(i, i + 1);
    ++i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization

struct EntityPattern {
  std::string name;
  std::string source;
  std::regex re;
};

// Ordered regex classes used to find standardizable values in intents. Order
// breaks ties between matches that start at the same offset.
class EntityPatterns {
 public:
  EntityPatterns() = default;
  explicit EntityPatterns(std::vector<EntityPattern> p, std::string version = "unversioned")
      : patterns_(std::move(p)), version_(std::move(version)) {}

  // Format: one "name <whitespace> regex" per line. The regex is everything
  // after the first whitespace run, with trailing whitespace trimmed, in
  // ECMAScript syntax and taken verbatim (backslashes are regex escapes, not
  // file escapes). '#' starts a comment line; "# version: X" sets the version.
  static EntityPatterns parse(std::string_view content) {
    std::vector<EntityPattern> pats;
    std::string version = "unversioned";
    std::size_t lineno = 0;
    for (auto raw : text::lines(content)) {
      ++lineno;
      auto line = text::trim(raw);
      if (line.empty()) continue;
      if (line.front() == '#') {
        auto body = text::trim(line.substr(1));
        constexpr std::string_view key = "version:";
        if (body.substr(0, key.size()) == key) version = std::string(text::trim(body.substr(key.size())));
        continue;
      }
      auto ws = line.find_first_of(" \t");
      if (ws == std::string_view::npos)
        throw ConfigError("entity pattern line " + std::to_string(lineno) + ": missing regex");
      std::string name(line.substr(0, ws));
      std::string src(text::trim(line.substr(ws)));
      try {
        pats.push_back({name, src, std::regex(src, std::regex::ECMAScript | std::regex::optimize)});
      } catch (const std::regex_error& e) {
        throw ConfigError("entity pattern line " + std::to_string(lineno) + " (" + name + "): " + e.what());
      }
    }
    return EntityPatterns(std::move(pats), std::move(version));
  }

  static EntityPatterns load(const std::string& path) { return parse(text::read_file(path)); }

  const std::vector<EntityPattern>& patterns() const { return patterns_; }
  const std::string& version() const { return version_; }

 private:
  std::vector<EntityPattern> patterns_;
  std::string version_ = "unversioned";
};

inline constexpr std::string_view kDefaultEntityPatternsText =
    R"(# Entity classes replaced by var# placeholders, in priority order.
# version: 1
url       [A-Za-z][A-Za-z0-9+.\-]*://[^\s'"`]+
quoted    '[^'\n]*'|"[^"\n]*"|`[^`\n]*`
path      (?:~|\.{1,2})?/[\w.\-]+(?:/[\w.\-]+)*/?
filename  [\w\-]+(?:\.[\w\-]+)*\.(?:txt|csv|json|xml|yaml|yml|log|py|html|htm|db|sqlite|pem|key|crt|cer|cfg|ini|conf|zip|tar|gz|pkl|pickle|sh|bin|dat|pdf|png|jpg)\b
host      (?:[A-Za-z0-9\-]+\.)+(?:com|org|net|io|local|internal|lan)\b
ipv4      \d{1,3}(?:\.\d{1,3}){3}(?::\d+)?\b
number    \d+(?:\.\d+)?\b
)";

inline const EntityPatterns& default_entity_patterns() {
  static const EntityPatterns p = EntityPatterns::parse(kDefaultEntityPatternsText);
  return p;
}

// var#index -> original surface text, indices contiguous from 0.
class StandardizationDict {
 public:
  static std::string placeholder(std::size_t index) { return "var" + std::to_string(index); }

  std::size_t add(std::string value) {
    values_.push_back(std::move(value));
    return values_.size() - 1;
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const std::string& value(std::size_t index) const { return values_.at(index); }
  const std::vector<std::string>& values() const { return values_; }

  std::optional<std::string_view> lookup(std::size_t index) const {
    if (index >= values_.size()) return std::nullopt;
    return std::string_view(values_[index]);
  }

  bool operator==(const StandardizationDict&) const = default;

 private:
  std::vector<std::string> values_;
};

struct StandardizedIntent {
  std::string text;
  StandardizationDict dict;
};

namespace detail {

inline const std::regex& placeholder_re() {
  static const std::regex re(R"(\bvar(\d+)\b)");
  return re;
}

inline bool contains_placeholder(std::string_view s) {
  return std::regex_search(s.begin(), s.end(), placeholder_re());
}

// A value may only start where a new token could start.
inline bool at_token_boundary(std::string_view s, std::size_t pos) {
  if (pos == 0) return true;
  auto p = static_cast<unsigned char>(s[pos - 1]);
  return !(ident_char(p) || p == '.' || p == '/' || p == '-' || p == '~');
}

struct Candidate {
  std::size_t start = std::string_view::npos;
  std::size_t length = 0;
};

inline Candidate find_from(std::string_view s, std::size_t from, const std::regex& re) {
  while (from < s.size()) {
    std::match_results<std::string_view::const_iterator> m;
    auto flags = from > 0 ? std::regex_constants::match_prev_avail : std::regex_constants::match_default;
    if (!std::regex_search(s.begin() + static_cast<std::ptrdiff_t>(from), s.end(), m, re, flags)) return {};
    auto start = static_cast<std::size_t>(m.position(0)) + from;
    auto len = static_cast<std::size_t>(m.length(0));
    if (len > 0 && at_token_boundary(s, start) && !contains_placeholder(s.substr(start, len))) return {start, len};
    from = start + 1;
  }
  return {};
}

}  // namespace detail

// Replaces every value matched by the entity patterns, left to right, with
// var0, var1, ... and returns the reversal dictionary. Matches that would
// swallow an existing placeholder are skipped, so the operation is idempotent.
inline StandardizedIntent standardize(std::string_view intent,
                                      const EntityPatterns& patterns = default_entity_patterns()) {
  StandardizedIntent out;
  std::size_t pos = 0;
  while (pos < intent.size()) {
    detail::Candidate best;
    for (const auto& p : patterns.patterns()) {
      auto c = detail::find_from(intent, pos, p.re);
      if (c.start < best.start) best = c;
    }
    if (best.start == std::string_view::npos) break;
    out.text.append(intent.substr(pos, best.start - pos));
    auto index = out.dict.add(std::string(intent.substr(best.start, best.length)));
    out.text += StandardizationDict::placeholder(index);
    pos = best.start + best.length;
  }
  if (pos < intent.size()) out.text.append(intent.substr(pos));
  return out;
}

struct Destandardized {
  std::string text;
  std::vector<std::string> unknown_placeholders;
};

// Substitutes each var# found in the dictionary; unknown placeholders are left
// in place and reported.
inline Destandardized destandardize(std::string_view snippet, const StandardizationDict& dict) {
  Destandardized out;
  const auto& re = detail::placeholder_re();
  auto begin = snippet.begin();
  std::match_results<std::string_view::const_iterator> m;
  auto it = begin;
  while (std::regex_search(it, snippet.end(), m, re,
                           it == begin ? std::regex_constants::match_default
                                       : std::regex_constants::match_prev_avail)) {
    out.text.append(it, m[0].first);
    std::optional<std::string_view> value;
    const std::string digits = m[1].str();
    if (digits.size() < 10) value = dict.lookup(std::stoul(digits));
    if (value) {
      out.text += *value;
    } else {
      out.text += m[0].str();
      if (std::find(out.unknown_placeholders.begin(), out.unknown_placeholders.end(), m[0].str()) ==
          out.unknown_placeholders.end())
        out.unknown_placeholders.push_back(m[0].str());
    }
    it = m[0].second;
  }
  out.text.append(it, snippet.end());
  return out;
}

// Full intent pre-processing: stopword filtering followed by standardization.
inline StandardizedIntent preprocess_intent(std::string_view intent, const Stoplist& stoplist = default_stoplist(),
                                            const EntityPatterns& patterns = default_entity_patterns()) {
  return standardize(filter_stopwords(intent, stoplist), patterns);
}

}  // namespace poisonkit::nlpipe
