// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration behind the command-line tool: poisoning runs,
// sensitivity sweeps and the stealthiness / factor-importance analyses.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "poisonkit/corpus.hpp"
#include "poisonkit/error.hpp"
#include "poisonkit/genbridge.hpp"
#include "poisonkit/metrics.hpp"
#include "poisonkit/poison.hpp"
#include "poisonkit/stats.hpp"
#include "poisonkit/text.hpp"
#include "poisonkit/vulnrules.hpp"

namespace poisonkit::runner {

enum ExitCode : int { kOk = 0, kAnalysisFailure = 1, kConfigError = 2 };

inline std::vector<std::size_t> default_counts() { return {5, 10, 15, 20, 25, 30, 35, 40}; }

struct ExperimentConfig {
  std::string corpus_path;
  std::string ruleset_path;
  std::string stopwords_path;  // empty: built-in list
  std::string patterns_path;   // empty: built-in table
  std::string generator = "builtin";
  std::vector<Group> groups{Group::TPI, Group::ICI, Group::DPI};
  std::vector<std::size_t> counts = default_counts();
  bool include_baseline = true;
  std::size_t k = 0;  // single poisoning run
  std::uint64_t seed = 1;
  double alpha = 0.05;
  std::string out_dir = ".";
  std::size_t jobs = 1;

  // Fields that determine results; output location and parallelism excluded.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["corpus"] = corpus_path;
    j["ruleset"] = ruleset_path;
    j["stopwords"] = stopwords_path;
    j["patterns"] = patterns_path;
    j["generator"] = generator;
    auto& g = j["groups"] = nlohmann::ordered_json::array();
    for (auto x : groups) g.push_back(std::string(to_string(x)));
    j["counts"] = counts;
    j["include_baseline"] = include_baseline;
    j["k"] = k;
    j["seed"] = seed;
    j["alpha"] = alpha;
    return j;
  }

  std::string hash() const { return text::hex64(text::fnv1a(to_json().dump())); }

  void validate() const {
    if (corpus_path.empty()) throw ConfigError("no corpus given (--corpus)");
    if (ruleset_path.empty()) throw ConfigError("no ruleset given (--ruleset)");
    if (groups.empty()) throw ConfigError("no vulnerability group selected");
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] == 0) throw ConfigError("poison counts must be positive (k=0 is the baseline cell)");
      if (i && counts[i] <= counts[i - 1]) throw ConfigError("poison counts must be strictly increasing");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    genbridge::GeneratorConfig::parse(generator);
  }
};

// Everything loaded from the paths in a config.
struct Inputs {
  Dataset dataset;
  std::string corpus_hash;
  vulnrules::Ruleset rules;
  genbridge::Pipeline pipeline;
};

inline Inputs load_inputs(const ExperimentConfig& c) {
  Inputs in;
  std::string content;
  try {
    content = text::read_file(c.corpus_path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  in.dataset = parse_corpus(content);
  in.corpus_hash = text::hex64(text::fnv1a(content));
  in.rules = vulnrules::Ruleset::load(c.ruleset_path);
  if (!c.stopwords_path.empty()) in.pipeline.stoplist = nlpipe::Stoplist::load(c.stopwords_path);
  if (!c.patterns_path.empty()) in.pipeline.patterns = nlpipe::EntityPatterns::load(c.patterns_path);
  return in;
}

inline nlohmann::ordered_json provenance(const ExperimentConfig& c, const Inputs& in) {
  nlohmann::ordered_json p;
  p["config_hash"] = c.hash();
  p["seed"] = c.seed;
  p["corpus_hash"] = in.corpus_hash;
  p["ruleset"] = in.rules.name();
  p["ruleset_version"] = in.rules.version();
  p["stopwords_version"] = in.pipeline.stoplist.version();
  p["patterns_version"] = in.pipeline.patterns.version();
  return p;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

inline std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

// ---------------------------------------------------------------------------
// poison

struct PoisonOutcome {
  PoisonPlan plan;
  std::vector<PoisonChange> changes;
  std::string corpus_file;
  std::string plan_file;
};

inline std::string format_change_summary(const PoisonOutcome& o) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu", o.plan.k);
  os << "group " << to_string(o.plan.group) << ", k=" << buf << ", seed " << o.plan.seed << ", rate "
     << metrics::format_percent(o.plan.rate()) << " of " << o.plan.train_size << " training samples\n";
  for (const auto& c : o.changes) {
    os << "  " << c.id << ":";
    for (const auto& h : c.edits)
      os << " [" << text::join(h.removed, " ") << " -> " << text::join(h.added, " ") << "]";
    os << '\n';
  }
  return os.str();
}

// Writes <out>/poisoned.jsonl and <out>/plan.json for one (group, k, seed).
inline PoisonOutcome cmd_poison(const ExperimentConfig& c, Group group) {
  if (c.corpus_path.empty()) throw ConfigError("no corpus given (--corpus)");
  std::string content;
  try {
    content = text::read_file(c.corpus_path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  Dataset d = parse_corpus(content);
  PoisonOutcome o;
  o.plan = select_targets(d, group, c.k, c.seed);
  auto poisoned = apply_poison(d, o.plan);
  o.changes = poison_diff(d, poisoned.dataset);
  ensure_dir(c.out_dir);
  o.corpus_file = join_path(c.out_dir, "poisoned.jsonl");
  o.plan_file = join_path(c.out_dir, "plan.json");
  text::write_file(o.corpus_file, write_corpus(poisoned.dataset));
  text::write_file(o.plan_file, write_plan(o.plan));
  return o;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCell {
  Group group = Group::TPI;
  std::size_t k = 0;
  double rate = 0.0;
  std::optional<metrics::EvalReport> report;
  std::string error;  // set when the cell failed

  bool ok() const { return report.has_value(); }
};

struct SweepReport {
  std::string generator_spec;
  std::string generator_name;
  nlohmann::ordered_json config;
  nlohmann::ordered_json provenance;
  std::vector<SweepCell> cells;  // ordered by group, then k
  std::map<Group, bool> monotonic;  // builtin generator only

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return !c.ok(); }));
  }
};

// Runs every (group, k) cell, including k=0 when configured. Cells execute on
// a pool of `jobs` threads; each owns its generator session. Failed cells are
// recorded and the sweep continues.
inline SweepReport run_sweep(const ExperimentConfig& c, const Inputs& in) {
  c.validate();
  auto gen_config = genbridge::GeneratorConfig::parse(c.generator);
  SweepReport rep;
  rep.generator_spec = gen_config.spec();
  rep.generator_name = gen_config.kind == genbridge::GeneratorKind::BuiltinRetrieval ? "builtin-retrieval" : gen_config.command;
  rep.config = c.to_json();
  rep.provenance = provenance(c, in);

  std::vector<std::size_t> ks;
  if (c.include_baseline) ks.push_back(0);
  ks.insert(ks.end(), c.counts.begin(), c.counts.end());
  for (auto g : c.groups)
    for (auto k : ks) rep.cells.push_back({g, k, 0.0, std::nullopt, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rep.cells.size(); i = next++) {
      auto& cell = rep.cells[i];
      try {
        auto plan = select_targets(in.dataset, cell.group, cell.k, c.seed);
        cell.rate = plan.rate();
        auto result = genbridge::end_to_end(in.dataset, plan, gen_config, in.rules, in.pipeline);
        cell.report = std::move(result.report);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const std::size_t width = std::min(c.jobs, std::max<std::size_t>(rep.cells.size(), 1));
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (gen_config.kind == genbridge::GeneratorKind::BuiltinRetrieval) {
    for (auto g : c.groups) {
      bool mono = true;
      double prev = -1.0;
      for (const auto& cell : rep.cells) {
        if (cell.group != g || !cell.ok()) continue;
        if (cell.report->asr < prev) mono = false;
        prev = cell.report->asr;
      }
      rep.monotonic[g] = mono;
    }
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const SweepReport& r) {
  nlohmann::ordered_json j;
  j["generator"] = r.generator_name;
  j["generator_spec"] = r.generator_spec;
  j["provenance"] = r.provenance;
  j["config"] = r.config;
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : r.cells) {
    nlohmann::ordered_json e;
    e["group"] = std::string(to_string(c.group));
    e["k"] = c.k;
    e["rate"] = c.rate;
    if (c.ok()) {
      e["status"] = "ok";
      e["mean_ed"] = c.report->mean_ed;
      e["asr"] = c.report->asr;
      e["vulnerable_count"] = c.report->vulnerable_count;
      e["target_pattern_count"] = c.report->target_pattern_count;
      e["samples"] = metrics::to_json(*c.report)["samples"];
    } else {
      e["status"] = "failed";
      e["error"] = c.error;
    }
    cells.push_back(std::move(e));
  }
  if (!r.monotonic.empty()) {
    auto& m = j["monotonic"];
    for (const auto& [g, ok] : r.monotonic) m[std::string(to_string(g))] = ok;
  }
  j["failures"] = r.failures();
  return j;
}

inline std::string format_sweep_table(const SweepReport& r) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s | %-5s | %3s | %7s | %9s | %8s\n", "Model", "Group", "k", "Rate", "ASR (%)",
                "ED (%)");
  os << buf << std::string(66, '-') << '\n';
  for (const auto& c : r.cells) {
    if (c.ok()) {
      std::snprintf(buf, sizeof buf, "%-18s | %-5s | %3zu | %7s | %9s | %8s\n", r.generator_name.substr(0, 18).c_str(),
                    std::string(to_string(c.group)).c_str(), c.k, metrics::format_percent(c.rate).c_str(),
                    metrics::format_percent(c.report->asr).c_str(), metrics::format_percent(c.report->mean_ed).c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-18s | %-5s | %3zu | %7s | FAILED: %s\n", r.generator_name.substr(0, 18).c_str(),
                    std::string(to_string(c.group)).c_str(), c.k, metrics::format_percent(c.rate).c_str(),
                    c.error.c_str());
    }
    os << buf;
  }
  for (const auto& [g, ok] : r.monotonic)
    os << "ASR non-decreasing in k for " << to_string(g) << ": " << (ok ? "yes" : "NO") << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// stats

// The parts of a sweep report the analyses need, read back from JSON.
struct SweepSummary {
  struct Cell {
    Group group = Group::TPI;
    std::size_t k = 0;
    double mean_ed = 0.0;
    double asr = 0.0;
    std::vector<double> eds;
  };
  std::string generator;
  std::vector<Cell> cells;  // successful cells only
};

inline SweepSummary summarize(const nlohmann::json& j) {
  try {
    SweepSummary s;
    s.generator = j.at("generator").get<std::string>();
    for (const auto& c : j.at("cells")) {
      if (c.at("status").get<std::string>() != "ok") continue;
      SweepSummary::Cell cell;
      cell.group = group_from_string(c.at("group").get<std::string>());
      cell.k = c.at("k").get<std::size_t>();
      cell.mean_ed = c.at("mean_ed").get<double>();
      cell.asr = c.at("asr").get<double>();
      for (const auto& smp : c.at("samples")) cell.eds.push_back(smp.at("ed").get<double>());
      s.cells.push_back(std::move(cell));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed sweep report: ") + e.what());
  }
}

inline SweepSummary summarize(const SweepReport& r) { return summarize(nlohmann::json::parse(to_json(r).dump())); }

// Which observations feed the stealthiness t-test.
enum class TestPopulation { CellMeans, Snippets };

struct StealthResult {
  std::string generator;
  double baseline_ed = 0.0;
  double poisoned_ed = 0.0;  // mean of the tested observations
  std::size_t observations = 0;
  stats::TTestResult test;
  std::vector<stats::QQPoint> qq;
};

struct StatsReport {
  double alpha = 0.05;
  TestPopulation population = TestPopulation::CellMeans;
  std::vector<StealthResult> stealth;
  std::optional<double> pearson;  // ED vs ASR across poisoned cells
  std::string pearson_note;
  std::vector<stats::VarianceAllocation> allocation;  // ED, ASR
  std::string doe_note;
};

// Stealthiness per generator (post-poisoning ED against the k=0 baseline mean),
// Pearson r between ED and ASR over all poisoned cells, and the allocation of
// variation when a complete generator x group x count grid is supplied.
inline StatsReport run_stats(const std::vector<SweepSummary>& sweeps, double alpha, TestPopulation population) {
  StatsReport rep;
  rep.alpha = alpha;
  rep.population = population;
  std::vector<double> all_ed, all_asr;
  for (const auto& s : sweeps) {
    std::vector<double> base_eds, xs;
    for (const auto& c : s.cells) {
      if (c.k == 0) {
        base_eds.push_back(c.mean_ed);
        continue;
      }
      all_ed.push_back(c.mean_ed);
      all_asr.push_back(c.asr);
      if (population == TestPopulation::CellMeans) {
        xs.push_back(c.mean_ed);
      } else {
        xs.insert(xs.end(), c.eds.begin(), c.eds.end());
      }
    }
    if (base_eds.empty()) throw ConfigError("sweep for '" + s.generator + "' has no k=0 baseline cell");
    if (xs.size() < 2) throw ConfigError("sweep for '" + s.generator + "' has fewer than two poisoned observations");
    StealthResult r;
    r.generator = s.generator;
    // Baseline cells share one clean training set, so they agree; average anyway.
    r.baseline_ed = stats::mean(base_eds);
    r.test = stats::t_test_one_sample(xs, r.baseline_ed, alpha);
    r.poisoned_ed = r.test.sample_mean;
    r.observations = xs.size();
    r.qq = stats::qq_normal(xs);
    rep.stealth.push_back(std::move(r));
  }

  try {
    rep.pearson = stats::pearson_r(all_ed, all_asr);
  } catch (const StatsError& e) {
    rep.pearson_note = e.what();
  }

  std::set<std::string> names;
  for (const auto& s : sweeps) names.insert(s.generator);
  if (sweeps.size() < 2 || names.size() != sweeps.size()) {
    rep.doe_note = "allocation of variation skipped: needs sweeps from at least two distinct generators";
    return rep;
  }
  std::vector<std::size_t> ks;
  for (const auto& c : sweeps.front().cells)
    if (c.k) ks.push_back(c.k);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::array<std::vector<std::string>, 3> levels;
  for (const auto& s : sweeps) levels[0].push_back(s.generator);
  for (auto g : kAllGroups) levels[1].push_back(std::string(to_string(g)));
  for (auto k : ks) levels[2].push_back(std::to_string(k));
  if (ks.size() < 2) {
    rep.doe_note = "allocation of variation skipped: needs at least two poisoning counts";
    return rep;
  }
  stats::DoETable ed({"Model", "Vuln. Group", "Poisoning Rate"}, levels, "ED");
  stats::DoETable asr({"Model", "Vuln. Group", "Poisoning Rate"}, levels, "ASR");
  try {
    for (std::size_t m = 0; m < sweeps.size(); ++m)
      for (const auto& c : sweeps[m].cells) {
        if (!c.k) continue;
        auto kit = std::find(ks.begin(), ks.end(), c.k);
        auto ki = static_cast<std::size_t>(kit - ks.begin());
        ed.set(m, group_index(c.group), ki, c.mean_ed);
        asr.set(m, group_index(c.group), ki, c.asr);
      }
    if (!ed.complete()) {
      rep.doe_note = "allocation of variation skipped: incomplete generator x group x count grid";
      return rep;
    }
  } catch (const StatsError& e) {
    rep.doe_note = std::string("allocation of variation skipped: ") + e.what();
    return rep;
  }
  for (auto* t : {&ed, &asr}) {
    try {
      rep.allocation.push_back(stats::doe_allocation(*t));
    } catch (const StatsError& e) {
      rep.doe_note += (rep.doe_note.empty() ? "" : "; ") + t->response() + ": " + e.what();
    }
  }
  return rep;
}

inline std::string format_p(double p) {
  char buf[32];
  if (p < 0.0001) return "<0.0001";
  std::snprintf(buf, sizeof buf, "%.4f", p);
  return buf;
}

inline std::string format_stats_report(const StatsReport& r) {
  std::ostringstream os;
  char buf[256];
  os << "Stealthiness (one-sample two-sided t-test, alpha = " << r.alpha << ", population = "
     << (r.population == TestPopulation::CellMeans ? "cell means" : "snippets") << ")\n";
  std::snprintf(buf, sizeof buf, "%-20s | %19s | %19s | %9s | %s\n", "Model", "ED before attack (%)",
                "ED after attack (%)", "p-value", "verdict");
  os << buf << std::string(90, '-') << '\n';
  for (const auto& s : r.stealth) {
    std::snprintf(buf, sizeof buf, "%-20s | %19s | %19s | %9s | %s%s\n", s.generator.substr(0, 20).c_str(),
                  metrics::format_percent(s.baseline_ed).c_str(), metrics::format_percent(s.poisoned_ed).c_str(),
                  format_p(s.test.p).c_str(), s.test.reject ? "H0 rejected (not stealthy)" : "H0 retained (stealthy)",
                  s.test.degenerate ? " [degenerate]" : "");
    os << buf;
  }
  os << '\n';
  if (r.pearson) {
    std::snprintf(buf, sizeof buf, "Pearson r (ED vs ASR over poisoned cells): %.4f\n", *r.pearson);
    os << buf;
  } else {
    os << "Pearson r unavailable: " << r.pearson_note << '\n';
  }
  os << '\n';
  if (!r.allocation.empty()) {
    os << "Allocation of variation\n" << stats::format_allocation_table(r.allocation);
  }
  if (!r.doe_note.empty()) os << r.doe_note << '\n';
  return os.str();
}

inline nlohmann::ordered_json to_json(const StatsReport& r) {
  nlohmann::ordered_json j;
  j["alpha"] = r.alpha;
  j["population"] = r.population == TestPopulation::CellMeans ? "cell_means" : "snippets";
  auto& st = j["stealth"] = nlohmann::ordered_json::array();
  for (const auto& s : r.stealth) {
    nlohmann::ordered_json e;
    e["generator"] = s.generator;
    e["baseline_ed"] = s.baseline_ed;
    e["poisoned_ed"] = s.poisoned_ed;
    e["observations"] = s.observations;
    e["t"] = std::isfinite(s.test.t) ? nlohmann::ordered_json(s.test.t) : nlohmann::ordered_json(nullptr);
    e["df"] = s.test.df;
    e["p"] = s.test.p;
    e["reject"] = s.test.reject;
    e["degenerate"] = s.test.degenerate;
    auto& qq = e["qq"] = nlohmann::ordered_json::array();
    for (const auto& p : s.qq) qq.push_back({p.theoretical, p.sample});
    st.push_back(std::move(e));
  }
  j["pearson_r"] = r.pearson ? nlohmann::ordered_json(*r.pearson) : nlohmann::ordered_json(nullptr);
  auto& al = j["allocation"] = nlohmann::ordered_json::array();
  for (const auto& a : r.allocation) {
    nlohmann::ordered_json e;
    e["response"] = a.response;
    e["sst"] = a.sst;
    auto& terms = e["terms"] = nlohmann::ordered_json::array();
    for (const auto& t : a.terms) terms.push_back({{"factor", t.name}, {"df", t.df}, {"ss", t.ss}, {"ss_percent", t.ss_percent}});
    al.push_back(std::move(e));
  }
  if (!r.doe_note.empty()) j["doe_note"] = r.doe_note;
  return j;
}

}  // namespace poisonkit::runner
