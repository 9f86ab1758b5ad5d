// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "poisonkit/genbridge.hpp"
#include "poisonkit/metrics.hpp"
#include "poisonkit/poison.hpp"
#include "poisonkit/runner.hpp"
#include "poisonkit/stats.hpp"
#include "poisonkit/vulnrules.hpp"
#include "support.hpp"

using namespace poisonkit;
namespace gb = poisonkit::genbridge;
namespace rn = poisonkit::runner;

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
  bool ok = true;
  std::string failure;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      failure = what;
    }
  }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

const Dataset& corpus() {
  static const Dataset d = load_corpus(testsupport::data_path("minicorpus.jsonl"));
  return d;
}

const vulnrules::Ruleset& rules() {
  static const auto r = vulnrules::Ruleset::load(testsupport::data_path("rules.jsonl"));
  return r;
}

rn::ExperimentConfig mini_config() {
  rn::ExperimentConfig c;
  c.corpus_path = testsupport::data_path("minicorpus.jsonl");
  c.ruleset_path = testsupport::data_path("rules.jsonl");
  return c;
}

void baseline(Check& c) {
  auto start = Clock::now();
  for (auto g : kAllGroups) {
    auto r = gb::end_to_end(corpus(), select_targets(corpus(), g, 0, 1), gb::GeneratorConfig::parse("builtin"), rules());
    c.expect(r.report.asr == 0.0, std::string("k=0 ASR nonzero for ") + std::string(to_string(g)));
    c.expect(r.report.target_pattern_count > 0, "no target-pattern test intents");
  }
  double secs = seconds_since(start);
  c.expect(secs < 5.0, "baseline took " + std::to_string(secs) + " s");
  c.detail << "k=0 ASR 0.00% for TPI/ICI/DPI in " << std::fixed << secs << " s";
}

void poisoning_rate(Check& c) {
  auto d = testsupport::replica_dataset();
  for (auto g : kAllGroups) {
    auto plan = select_targets(d, g, 20, 1);
    c.expect(std::fabs(plan.rate() * 100.0 - 2.9) <= 0.05, "replica rate off: " + std::to_string(plan.rate()));
  }
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    std::uniform_int_distribution<std::size_t> kd(0, eligible_pool(d, Group::TPI).size());
    auto k = kd(rng);
    auto plan = select_targets(d, Group::TPI, k, rng());
    c.expect(plan.target_ids.size() == k && plan.rate() == static_cast<double>(k) / 690.0, "rate != k / train_size");
    auto p = apply_poison(d, plan);
    c.expect(poison_diff(d, p.dataset).size() == k, "diff size != k");
  }
  c.detail << "k=20 on 690 training samples gives " << metrics::format_percent(20.0 / 690.0, 2)
           << "; 200 random plans satisfy rate = k / train_size";
}

void sweep_monotonic(Check& c) {
  auto start = Clock::now();
  auto cfg = mini_config();
  cfg.jobs = 4;
  auto in = rn::load_inputs(cfg);
  auto rep = rn::run_sweep(cfg, in);
  c.expect(rep.failures() == 0, "sweep cells failed");
  for (auto g : kAllGroups) c.expect(rep.monotonic.at(g), std::string("ASR decreased in k for ") + std::string(to_string(g)));
  for (auto g : kAllGroups) {
    auto plan = select_targets(corpus(), g, eligible_pool(corpus(), g).size(), 1);
    auto r = gb::end_to_end(corpus(), plan, gb::GeneratorConfig::parse("builtin"), rules());
    c.expect(r.report.asr == 1.0, std::string("full poisoning ASR below 1 for ") + std::string(to_string(g)));
  }
  double secs = seconds_since(start);
  c.expect(secs < 60.0, "sweep took " + std::to_string(secs) + " s");
  c.detail << "27-cell builtin sweep non-decreasing per group; full poisoning ASR 100.00%; " << std::fixed << secs << " s";
}

// Test intents whose nearest clean training neighbour is not a poisoning
// target must generate byte-identical code before and after poisoning.
void stealth(Check& c) {
  std::vector<double> diffs;
  std::size_t compared = 0;
  gb::Pipeline pipe;
  for (auto g : kAllGroups) {
    auto plan = select_targets(corpus(), g, 40, 1);
    std::set<std::string> targets(plan.target_ids.begin(), plan.target_ids.end());
    auto clean = gb::end_to_end(corpus(), select_targets(corpus(), g, 0, 1), gb::GeneratorConfig::parse("builtin"), rules());
    auto poisoned = gb::end_to_end(corpus(), plan, gb::GeneratorConfig::parse("builtin"), rules());
    gb::RetrievalGenerator ref;
    std::vector<gb::TrainingExample> ex;
    for (const auto* s : corpus().split(Split::Train)) ex.push_back({s->id, pipe.preprocess(s->intent).text, s->snippet_safe});
    ref.train(ex);
    for (std::size_t i = 0; i < clean.generations.size(); ++i) {
      const auto* s = corpus().find(clean.generations[i].sample_id);
      if (targets.count(ref.index().nearest(pipe.preprocess(s->intent).text).id)) continue;
      ++compared;
      c.expect(clean.generations[i].snippet == poisoned.generations[i].snippet, "non-target output changed for " + s->id);
      diffs.push_back(poisoned.report.samples[i].ed - clean.report.samples[i].ed);
    }
  }
  c.expect(diffs.size() >= 2, "too few unaffected intents");
  if (diffs.size() >= 2) {
    auto t = stats::t_test_one_sample(diffs, 0.0);
    c.expect(t.p == 1.0 && !t.reject, "paired ED difference t-test p = " + std::to_string(t.p));
  }
  c.detail << compared << " unaffected test intents byte-identical at k=40; paired ED t-test p = 1.0000";
}

void detector(Check& c) {
  auto cov = vulnrules::validate_ruleset_against_corpus(corpus(), rules());
  c.expect(cov.clean(), std::to_string(cov.violations.size()) + " coverage violations");
  c.expect(cov.cwes_without_rule.empty(), "CWE without rule");
  struct Ex {
    const char* code;
    std::optional<Group> want;
  };
  const Ex exemplars[] = {
      {"subprocess.call(cmd, shell=True)", Group::TPI},
      {"pickle.loads(data)", Group::DPI},
      {"ctx = ssl.create_default_context()\nctx.check_hostname = False\nctx.verify_mode = ssl.CERT_NONE", Group::ICI},
      {"ctx = ssl.create_default_context()\nctx.check_hostname = True\nctx.verify_mode = ssl.CERT_REQUIRED", std::nullopt},
      {"key = rsa.generate_private_key(public_exponent=65537, key_size=1024)", Group::DPI},
  };
  for (const auto& e : exemplars)
    c.expect(vulnrules::classify_group(e.code, rules()) == e.want, std::string("exemplar misclassified: ") + e.code);
  c.detail << cov.safe_checked << " safe and " << cov.unsafe_checked << " unsafe snippets classified as labelled; 5 exemplars";
}

void edit_distance(Check& c) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    auto a = testsupport::random_string(rng, 40, "abcdef=()._");
    auto b = testsupport::random_string(rng, 40, "abcdef=()._");
    auto longest = std::max(a.size(), b.size());
    double want = longest ? 1.0 - static_cast<double>(testsupport::oracle_levenshtein(a, b)) / static_cast<double>(longest) : 1.0;
    c.expect(metrics::edit_distance_norm(a, b) == want, "ED mismatch on '" + a + "' vs '" + b + "'");
    c.expect(metrics::edit_distance_norm(a, a) == 1.0, "identity is not 1");
  }
  c.expect(metrics::edit_distance_norm("", "") == 1.0 && metrics::edit_distance_norm("", "x") == 0.0, "empty cases");
  c.detail << "1000 random pairs match the full-matrix oracle; identity and empty cases";
}

void stats_oracles(Check& c) {
  std::size_t cases = 0;
  for (double t : {0.0, 0.5, 1.4142135623730951, 2.0, 3.5, 8.0})
    for (double df : {1.0, 4.0, 10.0, 30.0, 200.0}) {
      boost::math::students_t dist(df);
      double want = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
      c.expect(std::fabs(stats::t_two_sided_p(t, df) - want) <= 1e-6, "t p-value off at t=" + std::to_string(t));
      ++cases;
    }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 20; ++rep) {
    std::array<std::vector<std::string>, 3> levels{{{"a", "b", "c"}, {"TPI", "ICI", "DPI"}, {}}};
    for (int k = 1; k <= 8; ++k) levels[2].push_back(std::to_string(5 * k));
    stats::DoETable t({"Model", "Vuln. Group", "Poisoning Rate"}, levels, "ED");
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t k = 0; k < 8; ++k) t.set(a, b, k, u(rng));
    auto alloc = stats::doe_allocation(t);
    double sum = 0;
    for (const auto& term : alloc.terms) sum += term.ss;
    c.expect(std::fabs(sum - alloc.sst) <= 1e-9 * alloc.sst, "sum of SS != SST");
  }
  c.detail << cases << " p-values within 1e-6 of Boost.Math; 20 random 3x3x8 allocations sum to SST";
}

void reproducibility(Check& c) {
  testsupport::TempDir dir;
  auto cfg = mini_config();
  cfg.k = 17;
  cfg.seed = 7;
  std::string corpus_bytes[2], plan_bytes[2], sweep_bytes[2];
  for (int run = 0; run < 2; ++run) {
    cfg.out_dir = dir.file("run" + std::to_string(run));
    auto o = rn::cmd_poison(cfg, Group::TPI);
    corpus_bytes[run] = text::read_file(o.corpus_file);
    plan_bytes[run] = text::read_file(o.plan_file);
    auto sweep_cfg = mini_config();
    sweep_cfg.counts = {10, 20, 30};
    sweep_cfg.jobs = run == 0 ? 1 : 4;
    sweep_bytes[run] = rn::to_json(rn::run_sweep(sweep_cfg, rn::load_inputs(sweep_cfg))).dump(2);
  }
  c.expect(corpus_bytes[0] == corpus_bytes[1], "poisoned corpus differs");
  c.expect(plan_bytes[0] == plan_bytes[1], "plan differs");
  c.expect(sweep_bytes[0] == sweep_bytes[1], "sweep report differs between 1 and 4 jobs");
  c.detail << "poisoned corpus, plan and sweep report byte-identical across runs";
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void(Check&)>> criteria[] = {
      {"clean baseline has zero attack success", baseline},
      {"poisoning rate is k over training size", poisoning_rate},
      {"attack success grows with poisoning", sweep_monotonic},
      {"poisoning leaves unrelated outputs unchanged", stealth},
      {"detector agrees with corpus labels", detector},
      {"edit distance matches reference", edit_distance},
      {"statistics match reference implementations", stats_oracles},
      {"runs are reproducible", reproducibility},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    if (!c.ok) ++failed;
    std::printf("%s  %s: %s\n", c.ok ? "PASS" : "FAIL", name, (c.ok ? c.detail.str() : c.failure).c_str());
  }
  std::printf("NOTE  absolute ASR and ED values are measured on the bundled mini-corpus with the built-in generator; "
              "they are not expected to match large-model figures\n");
  return failed ? 1 : 0;
}
