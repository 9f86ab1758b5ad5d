// SPDX-License-Identifier: Apache-2.0
//
// Rule-based detector deciding whether a (possibly incomplete) code snippet
// contains a weakness from one of the three vulnerability groups.
//
// Ruleset files are JSON Lines. An optional first record
//   {"ruleset": "<name>", "version": "<version>"}
// names the ruleset; every other record is one rule:
//   {"id": "...", "cwe": "CWE-078", "pattern": "shell = True",
//    "requires": ["..."], "unless": ["..."], "description": "..."}
// Blank lines and lines starting with '#' are ignored. Rule priority is file
// order.
//
// Pattern grammar (elements separated by whitespace, matched against the
// code tokenizer's output):
//   tok       the literal token `tok`
//   *         any single token
//   /re/      a single token fully matching the ECMAScript regex `re`
//   ...       a gap of zero or more tokens
//   ...N      a gap of at most N tokens
//   \x        the literal token `x` (escapes `*`, `...`, `/`, `\`)
// A pattern must contain at least one non-gap element and may not begin or
// end with a gap.
//
// A rule fires when its pattern matches, every `requires` pattern matches
// somewhere in the snippet, and no `unless` pattern does.
#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "poisonkit/corpus.hpp"
#include "poisonkit/error.hpp"
#include "poisonkit/nlpipe.hpp"
#include "poisonkit/taxonomy.hpp"
#include "poisonkit/text.hpp"

namespace poisonkit::vulnrules {

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  bool operator==(const TokenSpan&) const = default;
};

class Pattern {
 public:
  enum class Kind { Literal, Any, Regex, Gap };

  struct Element {
    Kind kind;
    std::string text;
    std::size_t max_gap = 0;  // Gap only; SIZE_MAX means unbounded
    std::shared_ptr<const std::regex> re;
  };

  static Pattern parse(std::string_view source) {
    Pattern p;
    p.source_ = std::string(source);
    for (const auto& raw : text::split_ws(source)) {
      Element e{Kind::Literal, raw, 0, nullptr};
      if (raw == "*") {
        e.kind = Kind::Any;
      } else if (raw.rfind("...", 0) == 0 && (raw.size() == 3 || std::all_of(raw.begin() + 3, raw.end(), [](char c) {
                                                 return c >= '0' && c <= '9';
                                               }))) {
        e.kind = Kind::Gap;
        e.max_gap = raw.size() == 3 ? SIZE_MAX : std::stoul(raw.substr(3));
      } else if (raw.size() >= 2 && raw.front() == '/' && raw.back() == '/') {
        e.kind = Kind::Regex;
        try {
          e.re = std::make_shared<const std::regex>(raw.substr(1, raw.size() - 2), std::regex::ECMAScript);
        } catch (const std::regex_error& ex) {
          throw RulesetError("bad regex element " + raw + " in pattern '" + p.source_ + "': " + ex.what());
        }
      } else if (raw.size() >= 2 && raw.front() == '\\') {
        e.text = raw.substr(1);
      }
      p.elements_.push_back(std::move(e));
    }
    if (p.elements_.empty()) throw RulesetError("empty pattern");
    if (p.elements_.front().kind == Kind::Gap || p.elements_.back().kind == Kind::Gap)
      throw RulesetError("pattern '" + p.source_ + "' may not begin or end with a gap");
    return p;
  }

  const std::string& source() const { return source_; }
  const std::vector<Element>& elements() const { return elements_; }

  // Leftmost match; among matches at the same start, the one using the
  // shortest gaps.
  std::optional<TokenSpan> find(const std::vector<std::string>& tokens) const {
    for (std::size_t start = 0; start < tokens.size(); ++start)
      if (auto end = match_at(tokens, 0, start)) return TokenSpan{start, *end};
    return std::nullopt;
  }

  bool matches_anywhere(const std::vector<std::string>& tokens) const { return find(tokens).has_value(); }

 private:
  static bool element_matches(const Element& e, const std::string& tok) {
    switch (e.kind) {
      case Kind::Literal: return tok == e.text;
      case Kind::Any: return true;
      case Kind::Regex: return std::regex_match(tok, *e.re);
      case Kind::Gap: return false;
    }
    return false;
  }

  std::optional<std::size_t> match_at(const std::vector<std::string>& tokens, std::size_t ei, std::size_t ti) const {
    if (ei == elements_.size()) return ti;
    const auto& e = elements_[ei];
    if (e.kind == Kind::Gap) {
      for (std::size_t skip = 0; skip <= e.max_gap && ti + skip <= tokens.size(); ++skip)
        if (auto end = match_at(tokens, ei + 1, ti + skip)) return end;
      return std::nullopt;
    }
    if (ti >= tokens.size() || !element_matches(e, tokens[ti])) return std::nullopt;
    return match_at(tokens, ei + 1, ti + 1);
  }

  std::string source_;
  std::vector<Element> elements_;
};

struct Rule {
  std::string id;
  std::string cwe;
  Group group = Group::TPI;
  Pattern pattern;
  std::vector<Pattern> requires_all;
  std::vector<Pattern> unless_any;
  std::string description;
  std::size_t priority = 0;  // file order
};

class Ruleset {
 public:
  Ruleset() = default;
  Ruleset(std::string name, std::string version, std::vector<Rule> rules)
      : name_(std::move(name)), version_(std::move(version)), rules_(std::move(rules)) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      auto& r = rules_[i];
      r.priority = i;
      if (r.id.empty()) throw RulesetError("rule with empty id");
      if (!ids.insert(r.id).second) throw RulesetError("duplicate rule id '" + r.id + "'");
      auto g = group_of_cwe(r.cwe);
      if (!g) throw RulesetError("rule '" + r.id + "': " + r.cwe + " is not in the taxonomy");
      if (*g != r.group) throw RulesetError("rule '" + r.id + "': group does not match taxonomy for " + r.cwe);
    }
  }

  static Ruleset parse(std::string_view content) {
    std::string name = "unnamed", version = "unversioned";
    std::vector<Rule> rules;
    std::size_t lineno = 0;
    bool first_record = true;
    for (auto raw : text::lines(content)) {
      ++lineno;
      auto line = text::trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto where = [&] { return "ruleset line " + std::to_string(lineno) + ": "; };
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw RulesetError(where() + e.what());
      }
      if (!j.is_object()) throw RulesetError(where() + "record is not an object");
      if (first_record && j.contains("ruleset")) {
        name = j.value("ruleset", name);
        version = j.value("version", version);
        first_record = false;
        continue;
      }
      first_record = false;
      try {
        Rule r;
        r.id = j.at("id").get<std::string>();
        r.cwe = j.at("cwe").get<std::string>();
        auto g = group_of_cwe(r.cwe);
        if (!g) throw RulesetError(where() + r.cwe + " is not in the taxonomy");
        r.group = *g;
        if (j.contains("group") && group_from_string(j["group"].get<std::string>()) != r.group)
          throw RulesetError(where() + "group does not match taxonomy for " + r.cwe);
        r.pattern = Pattern::parse(j.at("pattern").get<std::string>());
        for (const auto& s : j.value("requires", std::vector<std::string>{})) r.requires_all.push_back(Pattern::parse(s));
        for (const auto& s : j.value("unless", std::vector<std::string>{})) r.unless_any.push_back(Pattern::parse(s));
        r.description = j.value("description", "");
        rules.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw RulesetError(where() + e.what());
      } catch (const Error& e) {
        if (dynamic_cast<const RulesetError*>(&e)) throw;
        throw RulesetError(where() + e.what());
      }
    }
    return Ruleset(std::move(name), std::move(version), std::move(rules));
  }

  static Ruleset load(const std::string& path) { return parse(text::read_file(path)); }

  const std::string& name() const { return name_; }
  const std::string& version() const { return version_; }
  const std::vector<Rule>& rules() const { return rules_; }

  std::set<std::string> covered_cwes() const {
    std::set<std::string> out;
    for (const auto& r : rules_) out.insert(r.cwe);
    return out;
  }

 private:
  std::string name_ = "unnamed";
  std::string version_ = "unversioned";
  std::vector<Rule> rules_;
};

struct Detection {
  std::string rule_id;
  std::string cwe;
  Group group = Group::TPI;
  TokenSpan span;
  std::size_t priority = 0;

  bool operator==(const Detection&) const = default;
};

inline std::vector<Detection> detect_tokens(const std::vector<std::string>& tokens, const Ruleset& rules) {
  std::vector<Detection> out;
  for (const auto& r : rules.rules()) {
    auto span = r.pattern.find(tokens);
    if (!span) continue;
    bool blocked = std::any_of(r.unless_any.begin(), r.unless_any.end(),
                               [&](const Pattern& p) { return p.matches_anywhere(tokens); });
    if (blocked) continue;
    bool ok = std::all_of(r.requires_all.begin(), r.requires_all.end(),
                          [&](const Pattern& p) { return p.matches_anywhere(tokens); });
    if (!ok) continue;
    out.push_back({r.id, r.cwe, r.group, *span, r.priority});
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
    return a.rule_id < b.rule_id;
  });
  return out;
}

// Every firing rule, ordered by span start then rule id. Empty means the
// snippet is clean under the ruleset.
inline std::vector<Detection> detect(std::string_view snippet, const Ruleset& rules) {
  return detect_tokens(nlpipe::tokenize_code(snippet).tokens, rules);
}

// Group of the earliest detection; rules starting at the same token are
// ranked by file order.
inline std::optional<Group> classify_detections(const std::vector<Detection>& ds) {
  if (ds.empty()) return std::nullopt;
  const Detection* best = &ds.front();
  for (const auto& d : ds)
    if (d.span.begin == best->span.begin && d.priority < best->priority) best = &d;
  return best->group;
}

inline std::optional<Group> classify_group(std::string_view snippet, const Ruleset& rules) {
  return classify_detections(detect(snippet, rules));
}

inline std::string group_label(std::optional<Group> g) { return g ? std::string(to_string(*g)) : "none"; }

// ---------------------------------------------------------------------------
// Corpus coverage

struct Violation {
  std::string sample_id;
  bool unsafe_variant = false;  // which snippet of the sample was checked
  std::optional<Group> expected;
  std::optional<Group> got;
  std::vector<std::string> rule_ids;
};

struct CoverageReport {
  std::size_t safe_checked = 0;
  std::size_t unsafe_checked = 0;
  std::vector<Violation> violations;
  std::map<std::string, std::size_t> rule_hits;      // rule id -> unsafe snippets it fired on
  std::set<std::string> cwes_without_rule;           // labelled in corpus, no rule for it

  bool clean() const { return violations.empty(); }
};

// Every unsafe variant must classify to its labelled group and every safe
// snippet must produce no detection at all.
inline CoverageReport validate_ruleset_against_corpus(const Dataset& d, const Ruleset& rules) {
  CoverageReport rep;
  auto covered = rules.covered_cwes();
  for (const auto& r : rules.rules()) rep.rule_hits[r.id] = 0;
  for (const auto& s : d.samples()) {
    ++rep.safe_checked;
    auto safe_ds = detect(s.snippet_safe, rules);
    if (!safe_ds.empty()) {
      Violation v{s.id, false, std::nullopt, classify_detections(safe_ds), {}};
      for (const auto& x : safe_ds) v.rule_ids.push_back(x.rule_id);
      rep.violations.push_back(std::move(v));
    }
    if (!s.unsafe) continue;
    ++rep.unsafe_checked;
    if (!covered.count(s.unsafe->cwe)) rep.cwes_without_rule.insert(s.unsafe->cwe);
    auto ds = detect(s.unsafe->snippet, rules);
    for (const auto& x : ds) ++rep.rule_hits[x.rule_id];
    auto got = classify_detections(ds);
    if (got != s.unsafe->group) {
      Violation v{s.id, true, s.unsafe->group, got, {}};
      for (const auto& x : ds) v.rule_ids.push_back(x.rule_id);
      rep.violations.push_back(std::move(v));
    }
  }
  return rep;
}

}  // namespace poisonkit::vulnrules
