// SPDX-License-Identifier: Apache-2.0
//
// Intent/snippet datasets: loading, validation, canonical writing and the
// summary statistics reported for a corpus.
#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "poisonkit/error.hpp"
#include "poisonkit/nlpipe.hpp"
#include "poisonkit/taxonomy.hpp"
#include "poisonkit/text.hpp"

namespace poisonkit {

enum class Split { Train, Val, Test };

inline constexpr std::array<Split, 3> kAllSplits{Split::Train, Split::Val, Split::Test};

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

struct UnsafeVariant {
  std::string snippet;
  std::string cwe;
  Group group = Group::TPI;

  bool operator==(const UnsafeVariant&) const = default;
};

struct Sample {
  std::string id;
  std::string intent;
  std::string snippet_safe;
  std::optional<UnsafeVariant> unsafe;
  Split split = Split::Train;
  bool target_pattern = false;

  bool has_unsafe() const { return unsafe.has_value(); }
  std::optional<Group> group() const { return unsafe ? std::optional<Group>(unsafe->group) : std::nullopt; }

  bool operator==(const Sample&) const = default;
};

// Checks the per-sample invariants; returns a message for the first violation.
inline std::optional<std::string> check_sample(const Sample& s) {
  if (s.id.empty()) return "empty id";
  if (text::trim(s.intent).empty()) return "sample '" + s.id + "': empty intent";
  if (text::trim(s.snippet_safe).empty()) return "sample '" + s.id + "': empty snippet_safe";
  if (s.unsafe) {
    if (s.unsafe->snippet.empty()) return "sample '" + s.id + "': empty snippet_unsafe";
    auto g = group_of_cwe(s.unsafe->cwe);
    if (!g) return "sample '" + s.id + "': " + s.unsafe->cwe + " is not in the taxonomy";
    if (*g != s.unsafe->group)
      return "sample '" + s.id + "': " + s.unsafe->cwe + " belongs to group " + std::string(to_string(*g)) +
             ", not " + std::string(to_string(s.unsafe->group));
  }
  if (s.target_pattern && s.split != Split::Test)
    return "sample '" + s.id + "': target_pattern is only allowed on test samples";
  if (s.target_pattern && !s.unsafe)
    return "sample '" + s.id + "': target_pattern sample needs cwe/group labels";
  return std::nullopt;
}

// Immutable after construction; shares freely across readers.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (auto err = check_sample(samples_[i])) throw CorpusError(0, *err);
      if (!index_.emplace(samples_[i].id, i).second)
        throw CorpusError(0, "duplicate id '" + samples_[i].id + "'");
    }
  }

  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  const Sample* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &samples_[it->second];
  }

  std::vector<const Sample*> split(Split s) const {
    std::vector<const Sample*> out;
    for (const auto& x : samples_)
      if (x.split == s) out.push_back(&x);
    return out;
  }

  std::size_t count(Split s) const {
    std::size_t n = 0;
    for (const auto& x : samples_) n += x.split == s;
    return n;
  }

  bool operator==(const Dataset& o) const { return samples_ == o.samples_; }

 private:
  std::vector<Sample> samples_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Record format: one JSON object per line, fields in canonical order
// id, intent, snippet_safe, snippet_unsafe, cwe, group, split, target_pattern.

inline constexpr std::array<std::string_view, 8> kRecordFields{
    "id", "intent", "snippet_safe", "snippet_unsafe", "cwe", "group", "split", "target_pattern"};

inline nlohmann::ordered_json to_record(const Sample& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["intent"] = s.intent;
  j["snippet_safe"] = s.snippet_safe;
  if (s.unsafe) {
    j["snippet_unsafe"] = s.unsafe->snippet;
    j["cwe"] = s.unsafe->cwe;
    j["group"] = std::string(to_string(s.unsafe->group));
  } else {
    j["snippet_unsafe"] = nullptr;
    j["cwe"] = nullptr;
    j["group"] = nullptr;
  }
  j["split"] = std::string(to_string(s.split));
  j["target_pattern"] = s.target_pattern;
  return j;
}

inline Sample parse_record(std::string_view line, std::size_t lineno) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorpusError(lineno, std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw CorpusError(lineno, "malformed record: not an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto f : kRecordFields) known |= key == f;
    if (!known) throw CorpusError(lineno, "malformed record: unknown field '" + key + "'");
  }
  auto req_string = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string())
      throw CorpusError(lineno, std::string("malformed record: field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) throw CorpusError(lineno, std::string("malformed record: missing field '") + key + "'");
    if (j[key].is_null()) return std::nullopt;
    if (!j[key].is_string())
      throw CorpusError(lineno, std::string("malformed record: field '") + key + "' must be a string or null");
    return j[key].get<std::string>();
  };

  Sample s;
  s.id = req_string("id");
  s.intent = req_string("intent");
  s.snippet_safe = req_string("snippet_safe");
  auto unsafe = opt_string("snippet_unsafe");
  auto cwe = opt_string("cwe");
  auto group = opt_string("group");
  if (unsafe.has_value() != cwe.has_value() || unsafe.has_value() != group.has_value())
    throw CorpusError(lineno, "sample '" + s.id + "': snippet_unsafe, cwe and group must be all present or all null");
  if (unsafe) {
    auto g = parse_group(*group);
    if (!g) throw CorpusError(lineno, "sample '" + s.id + "': unknown group '" + *group + "'");
    s.unsafe = UnsafeVariant{*unsafe, *cwe, *g};
  }
  auto split = parse_split(req_string("split"));
  if (!split) throw CorpusError(lineno, "sample '" + s.id + "': split must be train, val or test");
  s.split = *split;
  if (!j.contains("target_pattern") || !j["target_pattern"].is_boolean())
    throw CorpusError(lineno, "malformed record: field 'target_pattern' must be a boolean");
  s.target_pattern = j["target_pattern"].get<bool>();
  if (auto err = check_sample(s)) throw CorpusError(lineno, *err);
  return s;
}

// Blank lines are skipped; every other line must be a record.
inline Dataset parse_corpus(std::string_view content) {
  std::vector<Sample> samples;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t lineno = 0;
  for (auto line : text::lines(content)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto s = parse_record(line, lineno);
    if (auto [it, inserted] = seen.emplace(s.id, lineno); !inserted)
      throw CorpusError(lineno, "duplicate id '" + s.id + "' (first seen on line " + std::to_string(it->second) + ")");
    samples.push_back(std::move(s));
  }
  return Dataset(std::move(samples));
}

inline Dataset load_corpus(const std::string& path) {
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const Error& e) {
    throw CorpusError(0, e.what());
  }
  return parse_corpus(content);
}

inline std::string write_corpus(const Dataset& d) {
  std::string out;
  for (const auto& s : d.samples()) {
    out += to_record(s).dump();
    out += '\n';
  }
  return out;
}

inline void save_corpus(const Dataset& d, const std::string& path) { text::write_file(path, write_corpus(d)); }

// ---------------------------------------------------------------------------
// Statistics

struct TokenSummary {
  std::size_t count = 0;          // texts summarized
  std::size_t unique_tokens = 0;
  double mean_tokens = 0.0;

  bool operator==(const TokenSummary&) const = default;
};

struct CorpusStats {
  std::size_t pairs = 0;                 // unique intent/snippet pairs (samples)
  std::size_t safe_snippets = 0;         // samples with no unsafe variant
  std::size_t unsafe_snippets = 0;       // samples with an unsafe variant
  std::array<std::size_t, 3> per_split{};
  std::array<std::size_t, 3> per_group{};  // unsafe samples by group
  TokenSummary intents;
  TokenSummary safe;    // safe-only snippets
  TokenSummary unsafe;  // unsafe variants
  std::array<double, 3> group_mean_tokens{};  // mean tokens of unsafe variants per group

  bool operator==(const CorpusStats&) const = default;
};

namespace detail {

struct TokenAccumulator {
  std::set<std::string> vocab;
  std::size_t texts = 0;
  std::size_t tokens = 0;

  void add(const nlpipe::TokenSeq& seq) {
    ++texts;
    tokens += seq.size();
    vocab.insert(seq.tokens.begin(), seq.tokens.end());
  }

  TokenSummary summary() const {
    return {texts, vocab.size(), texts ? static_cast<double>(tokens) / static_cast<double>(texts) : 0.0};
  }
};

}  // namespace detail

// Counts follow the corpus convention: "safe snippets" are samples that only
// have a safe implementation, "unsafe snippets" are the vulnerable variants.
inline CorpusStats corpus_stats(const Dataset& d) {
  CorpusStats st;
  detail::TokenAccumulator intents, safe, unsafe;
  std::array<std::size_t, 3> group_tokens{};
  for (const auto& s : d.samples()) {
    ++st.pairs;
    ++st.per_split[static_cast<std::size_t>(s.split)];
    intents.add(nlpipe::tokenize_nl(s.intent));
    if (s.unsafe) {
      ++st.unsafe_snippets;
      auto gi = group_index(s.unsafe->group);
      ++st.per_group[gi];
      auto toks = nlpipe::tokenize_code(s.unsafe->snippet);
      group_tokens[gi] += toks.size();
      unsafe.add(toks);
    } else {
      ++st.safe_snippets;
      safe.add(nlpipe::tokenize_code(s.snippet_safe));
    }
  }
  st.intents = intents.summary();
  st.safe = safe.summary();
  st.unsafe = unsafe.summary();
  for (std::size_t g = 0; g < 3; ++g)
    st.group_mean_tokens[g] = st.per_group[g] ? static_cast<double>(group_tokens[g]) / static_cast<double>(st.per_group[g]) : 0.0;
  return st;
}

struct SplitReport {
  // counts[split][group] over samples carrying an unsafe variant
  std::array<std::array<std::size_t, 3>, 3> counts{};
  std::array<std::size_t, 3> totals{};  // all samples per split
  std::array<std::size_t, 3> target_patterns{};  // test target-pattern intents per group

  std::size_t at(Split s, Group g) const { return counts[static_cast<std::size_t>(s)][group_index(g)]; }
  std::size_t total(Split s) const { return totals[static_cast<std::size_t>(s)]; }
};

// With require_balanced_test set, the per-group test counts must differ by at
// most one (34/33/33 is balanced; 30/33/33 is not).
inline SplitReport split_report(const Dataset& d, bool require_balanced_test = false) {
  SplitReport r;
  for (const auto& s : d.samples()) {
    auto si = static_cast<std::size_t>(s.split);
    ++r.totals[si];
    if (s.unsafe) {
      ++r.counts[si][group_index(s.unsafe->group)];
      if (s.target_pattern) ++r.target_patterns[group_index(s.unsafe->group)];
    }
  }
  if (require_balanced_test) {
    const auto& t = r.counts[static_cast<std::size_t>(Split::Test)];
    auto [lo, hi] = std::minmax({t[0], t[1], t[2]});
    if (hi - lo > 1)
      throw CorpusError(0, "test split is unbalanced across groups (TPI " + std::to_string(t[0]) + ", ICI " +
                               std::to_string(t[1]) + ", DPI " + std::to_string(t[2]) + ")");
  }
  return r;
}

}  // namespace poisonkit
