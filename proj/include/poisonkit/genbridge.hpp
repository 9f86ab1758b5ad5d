// SPDX-License-Identifier: Apache-2.0
//
// Generators turn pre-processed intents into code. Two kinds exist: a
// built-in nearest-neighbour retrieval generator, and an external process
// speaking the line protocol below.
//
// Wire protocol (version 1): one compact JSON object per line, UTF-8,
// newline-terminated, on the child's stdin (requests) and stdout (replies).
// Requests and replies strictly alternate. Children log to stderr only.
//   -> {"op":"hello","protocol":1}
//   <- {"ok":true,"name":"<adapter>","protocol":1}
//   -> {"op":"train","samples":[{"id":"..","intent":"..","snippet":".."},...]}
//   <- {"ok":true}
//   -> {"op":"predict","intents":["..",...]}
//   <- {"ok":true,"snippets":["..",null,...],"errors":[null,"..",...]}
// Any request may be answered with {"ok":false,"error":"<message>"}. A null
// snippet marks a per-intent failure; "errors" is optional.
#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poisonkit/corpus.hpp"
#include "poisonkit/error.hpp"
#include "poisonkit/metrics.hpp"
#include "poisonkit/nlpipe.hpp"
#include "poisonkit/poison.hpp"
#include "poisonkit/subprocess.hpp"
#include "poisonkit/vulnrules.hpp"

namespace poisonkit::genbridge {

inline constexpr int kProtocolVersion = 1;

struct TrainingExample {
  std::string id;
  std::string intent;  // pre-processed
  std::string snippet;
};

struct RawPrediction {
  std::string snippet;
  std::optional<std::string> error;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string name() const = 0;
  virtual void train(const std::vector<TrainingExample>& examples) = 0;
  virtual std::vector<RawPrediction> predict(const std::vector<std::string>& intents) = 0;
};

// ---------------------------------------------------------------------------
// Built-in retrieval generator

// Lower-cased intent tokens, sorted, duplicates kept.
using TokenBag = std::vector<std::string>;

inline TokenBag token_bag(std::string_view preprocessed_intent) {
  TokenBag bag;
  for (auto& t : nlpipe::tokenize_nl(preprocessed_intent).tokens) bag.push_back(text::to_lower(t));
  std::sort(bag.begin(), bag.end());
  return bag;
}

// Multiset Jaccard: sum of min counts over sum of max counts. Two empty bags
// are identical (1.0).
inline double jaccard(const TokenBag& a, const TokenBag& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0, i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter, ++i, ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

class RetrievalIndex {
 public:
  struct Entry {
    std::string id;
    TokenBag bag;
    std::string snippet;
  };

  RetrievalIndex() = default;

  explicit RetrievalIndex(const std::vector<TrainingExample>& examples) {
    for (const auto& e : examples) entries_.push_back({e.id, token_bag(e.intent), e.snippet});
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < entries_.size(); ++i)
      if (entries_[i].id == entries_[i - 1].id) throw Error("duplicate training id '" + entries_[i].id + "'");
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  // Most similar entry; ties go to the smallest id.
  const Entry& nearest(std::string_view preprocessed_intent) const {
    if (entries_.empty()) throw Error("retrieval index is empty");
    std::string key(preprocessed_intent);
    if (auto it = cache_.find(key); it != cache_.end()) return entries_[it->second];
    auto bag = token_bag(preprocessed_intent);
    std::size_t best = 0;
    double best_sim = -1.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      double sim = jaccard(bag, entries_[i].bag);
      if (sim > best_sim) {
        best_sim = sim;
        best = i;
      }
    }
    cache_.emplace(std::move(key), best);
    return entries_[best];
  }

 private:
  std::vector<Entry> entries_;
  mutable std::unordered_map<std::string, std::size_t> cache_;
};

class RetrievalGenerator final : public Generator {
 public:
  std::string name() const override { return "builtin-retrieval"; }

  void train(const std::vector<TrainingExample>& examples) override { index_ = RetrievalIndex(examples); }

  std::vector<RawPrediction> predict(const std::vector<std::string>& intents) override {
    std::vector<RawPrediction> out;
    out.reserve(intents.size());
    for (const auto& q : intents) out.push_back({index_.nearest(q).snippet, std::nullopt});
    return out;
  }

  const RetrievalIndex& index() const { return index_; }

 private:
  RetrievalIndex index_;
};

// ---------------------------------------------------------------------------
// External process generator

struct Timeouts {
  std::chrono::milliseconds hello{std::chrono::seconds(30)};
  std::chrono::milliseconds train{std::chrono::seconds(600)};
  std::chrono::milliseconds predict{std::chrono::seconds(30)};
};

class ExternalGenerator final : public Generator {
 public:
  ExternalGenerator(std::string command, Timeouts timeouts)
      : command_(std::move(command)), timeouts_(timeouts), child_(std::make_unique<ChildProcess>(command_)) {
    auto reply = exchange({{"op", "hello"}, {"protocol", kProtocolVersion}}, timeouts_.hello);
    if (!reply.contains("protocol") || !reply["protocol"].is_number_integer() ||
        reply["protocol"].get<int>() != kProtocolVersion)
      fail("hello reply has missing or unsupported protocol version");
    name_ = reply.contains("name") && reply["name"].is_string() ? reply["name"].get<std::string>() : command_;
  }

  std::string name() const override { return name_; }

  void train(const std::vector<TrainingExample>& examples) override {
    nlohmann::ordered_json req;
    req["op"] = "train";
    auto& arr = req["samples"] = nlohmann::ordered_json::array();
    for (const auto& e : examples) arr.push_back({{"id", e.id}, {"intent", e.intent}, {"snippet", e.snippet}});
    exchange(req, timeouts_.train);
  }

  std::vector<RawPrediction> predict(const std::vector<std::string>& intents) override {
    nlohmann::ordered_json req;
    req["op"] = "predict";
    req["intents"] = intents;
    auto reply = exchange(req, timeouts_.predict);
    if (!reply.contains("snippets") || !reply["snippets"].is_array() || reply["snippets"].size() != intents.size())
      fail("predict reply must carry one snippet per intent");
    const nlohmann::json* errors = nullptr;
    if (reply.contains("errors")) {
      if (!reply["errors"].is_array() || reply["errors"].size() != intents.size())
        fail("predict reply 'errors' must be an array aligned with the intents");
      errors = &reply["errors"];
    }
    std::vector<RawPrediction> out;
    for (std::size_t i = 0; i < intents.size(); ++i) {
      const auto& s = reply["snippets"][i];
      RawPrediction p;
      if (s.is_string()) {
        p.snippet = s.get<std::string>();
      } else if (s.is_null()) {
        p.error = "generator produced no snippet";
      } else {
        fail("predict reply snippet " + std::to_string(i) + " is neither a string nor null");
      }
      if (errors && (*errors)[i].is_string()) p.error = (*errors)[i].get<std::string>();
      out.push_back(std::move(p));
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) {
    child_->terminate();
    throw ProtocolError(what);
  }

  nlohmann::json exchange(const nlohmann::ordered_json& request, std::chrono::milliseconds timeout) {
    std::optional<std::string> line;
    try {
      child_->write_line(request.dump());
      line = child_->read_line(timeout);
    } catch (const ProtocolError& e) {
      fail(e.what());
    }
    if (!line) fail("generator exited before replying");
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(*line);
    } catch (const nlohmann::json::parse_error&) {
      fail("generator sent a non-JSON line");
    }
    if (!reply.is_object() || !reply.contains("ok") || !reply["ok"].is_boolean())
      fail("generator reply lacks a boolean 'ok'");
    if (!reply["ok"].get<bool>()) {
      std::string msg = reply.contains("error") && reply["error"].is_string() ? reply["error"].get<std::string>()
                                                                            : "unspecified error";
      throw Error("generator reported failure: " + msg);
    }
    return reply;
  }

  std::string command_;
  Timeouts timeouts_;
  std::unique_ptr<ChildProcess> child_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Handles

enum class GeneratorKind { BuiltinRetrieval, ExternalProcess };
enum class SessionState { Idle, Trained, Failed };

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::BuiltinRetrieval;
  std::string command;  // external only
  Timeouts timeouts;

  // "builtin" or "exec:<shell command>".
  static GeneratorConfig parse(std::string_view spec) {
    GeneratorConfig c;
    if (spec == "builtin") return c;
    constexpr std::string_view prefix = "exec:";
    if (spec.substr(0, prefix.size()) == prefix && spec.size() > prefix.size()) {
      c.kind = GeneratorKind::ExternalProcess;
      c.command = std::string(spec.substr(prefix.size()));
      return c;
    }
    throw ConfigError("generator must be 'builtin' or 'exec:<command>', got '" + std::string(spec) + "'");
  }

  std::string spec() const { return kind == GeneratorKind::BuiltinRetrieval ? "builtin" : "exec:" + command; }
};

// Shared pre/post-processing configuration.
struct Pipeline {
  nlpipe::Stoplist stoplist = nlpipe::default_stoplist();
  nlpipe::EntityPatterns patterns = nlpipe::default_entity_patterns();

  nlpipe::StandardizedIntent preprocess(std::string_view intent) const {
    return nlpipe::preprocess_intent(intent, stoplist, patterns);
  }
};

struct IntentRequest {
  std::string id;
  std::string intent;  // raw
};

class GeneratorHandle {
 public:
  GeneratorHandle(GeneratorConfig config, Pipeline pipeline = {})
      : config_(std::move(config)), pipeline_(std::move(pipeline)) {}

  GeneratorKind kind() const { return config_.kind; }
  SessionState state() const { return state_; }
  const GeneratorConfig& config() const { return config_; }
  const std::string& last_error() const { return last_error_; }
  const Generator* generator() const { return gen_.get(); }

  // Trains on the training split; the training snippet of each sample is
  // snippet_safe (which holds the unsafe variant for poisoned targets).
  void train(const Dataset& d) {
    if (state_ != SessionState::Idle) throw Error("train requires an idle generator");
    try {
      std::vector<TrainingExample> examples;
      for (const auto* s : d.split(Split::Train))
        examples.push_back({s->id, pipeline_.preprocess(s->intent).text, s->snippet_safe});
      if (examples.empty()) throw Error("training split is empty");
      if (!gen_) gen_ = make_generator();
      gen_->train(examples);
      state_ = SessionState::Trained;
    } catch (const std::exception& e) {
      state_ = SessionState::Failed;
      last_error_ = e.what();
      throw;
    }
  }

  void train(const PoisonedDataset& d) { train(d.dataset); }

  // One result per request, in order. Per-intent failures give an empty
  // snippet and a note; protocol failures throw and mark the handle failed.
  std::vector<metrics::GenerationResult> predict(const std::vector<IntentRequest>& requests) {
    if (state_ != SessionState::Trained) throw Error("predict requires a trained generator");
    std::vector<nlpipe::StandardizedIntent> pre;
    std::vector<std::string> texts;
    for (const auto& r : requests) {
      pre.push_back(pipeline_.preprocess(r.intent));
      texts.push_back(pre.back().text);
    }
    std::vector<RawPrediction> raw;
    if (!texts.empty()) {
      try {
        raw = gen_->predict(texts);
      } catch (const std::exception& e) {
        state_ = SessionState::Failed;
        last_error_ = e.what();
        throw;
      }
    }
    std::vector<metrics::GenerationResult> out;
    for (std::size_t i = 0; i < requests.size(); ++i) {
      metrics::GenerationResult g;
      g.sample_id = requests[i].id;
      if (raw[i].error) {
        g.note = *raw[i].error;
      }
      auto post = nlpipe::destandardize(raw[i].snippet, pre[i].dict);
      g.snippet = std::move(post.text);
      if (!post.unknown_placeholders.empty()) {
        if (!g.note.empty()) g.note += "; ";
        g.note += "unknown placeholders: " + text::join(post.unknown_placeholders, ", ");
      }
      out.push_back(std::move(g));
    }
    return out;
  }

 private:
  std::unique_ptr<Generator> make_generator() const {
    if (config_.kind == GeneratorKind::BuiltinRetrieval) return std::make_unique<RetrievalGenerator>();
    return std::make_unique<ExternalGenerator>(config_.command, config_.timeouts);
  }

  GeneratorConfig config_;
  Pipeline pipeline_;
  std::unique_ptr<Generator> gen_;
  SessionState state_ = SessionState::Idle;
  std::string last_error_;
};

inline std::vector<IntentRequest> test_requests(const Dataset& d) {
  std::vector<IntentRequest> out;
  for (const auto* s : d.split(Split::Test)) out.push_back({s->id, s->intent});
  return out;
}

// Error raised by end_to_end, labelled with the failing stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct EndToEndResult {
  metrics::EvalReport report;
  std::vector<metrics::GenerationResult> generations;
};

// poison -> train -> predict on the test split -> de-standardize -> evaluate.
inline EndToEndResult end_to_end(const Dataset& d, const PoisonPlan& plan, const GeneratorConfig& config,
                                 const vulnrules::Ruleset& rules, const Pipeline& pipeline = {}) {
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };
  auto poisoned = stage("poison", [&] { return apply_poison(d, plan); });
  GeneratorHandle handle(config, pipeline);
  stage("train", [&] {
    handle.train(poisoned);
    return 0;
  });
  auto gens = stage("predict", [&] { return handle.predict(test_requests(d)); });
  auto report = stage("evaluate", [&] { return metrics::evaluate(gens, d, plan.group, rules); });
  return {std::move(report), std::move(gens)};
}

}  // namespace poisonkit::genbridge
