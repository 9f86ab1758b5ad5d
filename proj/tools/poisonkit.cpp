// SPDX-License-Identifier: Apache-2.0
//
// poisonkit command-line tool.
//
// Exit status: 0 success, 1 analysis failure (invalid ruleset coverage,
// failed sweep cells, ...), 2 configuration or I/O error.

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "poisonkit/corpus.hpp"
#include "poisonkit/genbridge.hpp"
#include "poisonkit/metrics.hpp"
#include "poisonkit/poison.hpp"
#include "poisonkit/runner.hpp"
#include "poisonkit/vulnrules.hpp"

using namespace poisonkit;
namespace rn = poisonkit::runner;

namespace {

struct Options {
  rn::ExperimentConfig cfg;
  std::string group = "TPI";
  std::vector<std::string> groups;
  bool balanced = false;
  bool json = false;
  std::string file;
  std::string population = "cell_means";
  std::vector<std::string> sweep_files;
  bool no_baseline = false;
};

Group parse_group_arg(const std::string& s) {
  auto g = parse_group(s);
  if (!g) throw ConfigError("unknown vulnerability group '" + s + "' (TPI, ICI or DPI)");
  return *g;
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) { text::write_file(path, j.dump(2) + "\n"); }

int run_corpus_validate(const Options& o) {
  Dataset d = load_corpus(o.cfg.corpus_path);
  auto r = split_report(d, o.balanced);
  std::printf("%zu samples: train %zu, val %zu, test %zu\n", d.size(), r.total(Split::Train), r.total(Split::Val),
              r.total(Split::Test));
  for (auto g : kAllGroups)
    std::printf("  %s: train %zu, val %zu, test %zu (%zu target-pattern)\n", std::string(to_string(g)).c_str(),
                r.at(Split::Train, g), r.at(Split::Val, g), r.at(Split::Test, g), r.target_patterns[group_index(g)]);
  if (!o.cfg.ruleset_path.empty()) {
    auto rules = vulnrules::Ruleset::load(o.cfg.ruleset_path);
    auto cov = vulnrules::validate_ruleset_against_corpus(d, rules);
    for (const auto& cwe : cov.cwes_without_rule) std::printf("no rule covers %s\n", cwe.c_str());
    for (const auto& v : cov.violations)
      std::printf("%s (%s): expected %s, detected %s [%s]\n", v.sample_id.c_str(), v.unsafe_variant ? "unsafe" : "safe",
                  vulnrules::group_label(v.expected).c_str(), vulnrules::group_label(v.got).c_str(),
                  text::join(v.rule_ids, ",").c_str());
    std::printf("ruleset %s: %zu unsafe and %zu safe snippets checked, %zu violations\n", rules.name().c_str(),
                cov.unsafe_checked, cov.safe_checked, cov.violations.size());
    if (!cov.clean() || !cov.cwes_without_rule.empty()) return rn::kAnalysisFailure;
  }
  return rn::kOk;
}

int run_corpus_stats(const Options& o) {
  Dataset d = load_corpus(o.cfg.corpus_path);
  auto st = corpus_stats(d);
  if (o.json) {
    nlohmann::ordered_json j;
    j["pairs"] = st.pairs;
    j["safe_snippets"] = st.safe_snippets;
    j["unsafe_snippets"] = st.unsafe_snippets;
    for (auto s : kAllSplits) j["splits"][std::string(to_string(s))] = st.per_split[static_cast<std::size_t>(s)];
    for (auto g : kAllGroups) {
      auto gi = group_index(g);
      j["groups"][std::string(to_string(g))] = {{"unsafe", st.per_group[gi]}, {"mean_tokens", st.group_mean_tokens[gi]}};
    }
    auto summary = [](const TokenSummary& t) {
      return nlohmann::ordered_json{{"count", t.count}, {"unique_tokens", t.unique_tokens}, {"mean_tokens", t.mean_tokens}};
    };
    j["intents"] = summary(st.intents);
    j["safe"] = summary(st.safe);
    j["unsafe"] = summary(st.unsafe);
    std::cout << j.dump(2) << '\n';
    return rn::kOk;
  }
  std::printf("%-26s %10s\n", "Statistic", "Value");
  std::printf("%-26s %10zu\n", "Unique pairs", st.pairs);
  std::printf("%-26s %10zu\n", "Safe-only snippets", st.safe_snippets);
  std::printf("%-26s %10zu\n", "Unsafe snippets", st.unsafe_snippets);
  for (auto g : kAllGroups)
    std::printf("%-26s %10zu\n", ("  " + std::string(to_string(g))).c_str(), st.per_group[group_index(g)]);
  std::printf("%-26s %10zu\n", "Unique intent tokens", st.intents.unique_tokens);
  std::printf("%-26s %10.2f\n", "Avg. intent tokens", st.intents.mean_tokens);
  std::printf("%-26s %10zu\n", "Unique safe code tokens", st.safe.unique_tokens);
  std::printf("%-26s %10.2f\n", "Avg. safe code tokens", st.safe.mean_tokens);
  std::printf("%-26s %10zu\n", "Unique unsafe code tokens", st.unsafe.unique_tokens);
  std::printf("%-26s %10.2f\n", "Avg. unsafe code tokens", st.unsafe.mean_tokens);
  for (auto g : kAllGroups)
    std::printf("%-26s %10.2f\n", ("Avg. tokens " + std::string(to_string(g))).c_str(),
                st.group_mean_tokens[group_index(g)]);
  return rn::kOk;
}

int run_poison(const Options& o) {
  auto out = rn::cmd_poison(o.cfg, parse_group_arg(o.group));
  std::cout << rn::format_change_summary(out);
  std::cout << "wrote " << out.corpus_file << " and " << out.plan_file << '\n';
  return rn::kOk;
}

int run_detect(const Options& o) {
  if (o.cfg.ruleset_path.empty()) throw ConfigError("no ruleset given (--ruleset)");
  auto rules = vulnrules::Ruleset::load(o.cfg.ruleset_path);
  std::string snippet;
  if (o.file.empty() || o.file == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    snippet = ss.str();
  } else {
    snippet = text::read_file(o.file);
  }
  auto ds = vulnrules::detect(snippet, rules);
  auto g = vulnrules::classify_detections(ds);
  if (o.json) {
    nlohmann::ordered_json j;
    j["group"] = g ? nlohmann::ordered_json(std::string(to_string(*g))) : nlohmann::ordered_json(nullptr);
    auto& arr = j["detections"] = nlohmann::ordered_json::array();
    for (const auto& d : ds)
      arr.push_back({{"rule", d.rule_id}, {"cwe", d.cwe}, {"group", std::string(to_string(d.group))},
                     {"span", {d.span.begin, d.span.end}}});
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& d : ds)
      std::printf("%s %s %s tokens [%zu, %zu)\n", d.rule_id.c_str(), d.cwe.c_str(), std::string(to_string(d.group)).c_str(),
                  d.span.begin, d.span.end);
    std::printf("group: %s\n", vulnrules::group_label(g).c_str());
  }
  return rn::kOk;
}

int run_eval(const Options& o) {
  o.cfg.validate();
  auto in = rn::load_inputs(o.cfg);
  auto group = parse_group_arg(o.group);
  auto plan = select_targets(in.dataset, group, o.cfg.k, o.cfg.seed);
  auto gen = genbridge::GeneratorConfig::parse(o.cfg.generator);
  auto res = genbridge::end_to_end(in.dataset, plan, gen, in.rules, in.pipeline);
  rn::ensure_dir(o.cfg.out_dir);
  auto j = metrics::to_json(res.report);
  j["plan"] = plan_to_json(plan);
  j["provenance"] = rn::provenance(o.cfg, in);
  auto path = rn::join_path(o.cfg.out_dir, "eval.json");
  write_json(path, j);
  std::printf("group %s, k=%zu (%s): ASR %s (%zu/%zu), mean ED %s\n", std::string(to_string(group)).c_str(), plan.k,
              metrics::format_percent(plan.rate()).c_str(), metrics::format_percent(res.report.asr).c_str(),
              res.report.vulnerable_count, res.report.target_pattern_count,
              metrics::format_percent(res.report.mean_ed).c_str());
  std::cout << "wrote " << path << '\n';
  return rn::kOk;
}

int run_sweep(Options o) {
  if (!o.groups.empty()) {
    o.cfg.groups.clear();
    for (const auto& g : o.groups) o.cfg.groups.push_back(parse_group_arg(g));
  }
  o.cfg.include_baseline = !o.no_baseline;
  o.cfg.validate();
  auto in = rn::load_inputs(o.cfg);
  auto rep = rn::run_sweep(o.cfg, in);
  rn::ensure_dir(o.cfg.out_dir);
  auto path = rn::join_path(o.cfg.out_dir, "sweep.json");
  write_json(path, rn::to_json(rep));
  std::cout << rn::format_sweep_table(rep);
  std::cout << "wrote " << path << '\n';
  if (rep.failures()) {
    std::fprintf(stderr, "%zu sweep cell(s) failed\n", rep.failures());
    return rn::kAnalysisFailure;
  }
  return rn::kOk;
}

int run_stats_cmd(const Options& o) {
  if (o.sweep_files.empty()) throw ConfigError("no sweep reports given");
  rn::TestPopulation pop;
  if (o.population == "cell_means") {
    pop = rn::TestPopulation::CellMeans;
  } else if (o.population == "snippets") {
    pop = rn::TestPopulation::Snippets;
  } else {
    throw ConfigError("population must be 'cell_means' or 'snippets'");
  }
  if (!(o.cfg.alpha > 0.0 && o.cfg.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  std::vector<rn::SweepSummary> sweeps;
  for (const auto& f : o.sweep_files) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text::read_file(f));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(f + ": " + e.what());
    }
    sweeps.push_back(rn::summarize(j));
  }
  auto rep = rn::run_stats(sweeps, o.cfg.alpha, pop);
  std::cout << rn::format_stats_report(rep);
  rn::ensure_dir(o.cfg.out_dir);
  auto path = rn::join_path(o.cfg.out_dir, "stats.json");
  write_json(path, rn::to_json(rep));
  std::cout << "wrote " << path << '\n';
  return rn::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Targeted data-poisoning experiments on NL-to-code corpora"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags take precedence");
  Options o;
  auto& c = o.cfg;

  auto add_corpus = [&](CLI::App* s) { s->add_option("--corpus", c.corpus_path, "Corpus JSONL file"); };
  auto add_ruleset = [&](CLI::App* s) { s->add_option("--ruleset", c.ruleset_path, "Detection ruleset JSONL file"); };
  auto add_pipeline = [&](CLI::App* s) {
    s->add_option("--stopwords", c.stopwords_path, "Stopword list (default: built-in)");
    s->add_option("--patterns", c.patterns_path, "Entity pattern table (default: built-in)");
  };
  auto add_out = [&](CLI::App* s) { s->add_option("--out", c.out_dir, "Output directory")->capture_default_str(); };
  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", c.seed, "Target selection seed")->capture_default_str(); };
  auto add_generator = [&](CLI::App* s) {
    s->add_option("--generator", c.generator, "'builtin' or 'exec:<command>'")->capture_default_str();
  };

  auto* corpus = app.add_subcommand("corpus", "Inspect a corpus");
  corpus->require_subcommand(1);
  auto* validate = corpus->add_subcommand("validate", "Check records, splits and (optionally) ruleset coverage");
  add_corpus(validate);
  add_ruleset(validate);
  validate->add_flag("--balanced-test", o.balanced, "Require group-balanced test split");
  auto* cstats = corpus->add_subcommand("stats", "Corpus statistics");
  add_corpus(cstats);
  cstats->add_flag("--json", o.json, "JSON output");

  auto* poison = app.add_subcommand("poison", "Write a poisoned corpus and its plan");
  add_corpus(poison);
  poison->add_option("--group", o.group, "Vulnerability group (TPI, ICI, DPI)")->capture_default_str();
  poison->add_option("--k", c.k, "Number of training samples to poison")->required();
  add_seed(poison);
  add_out(poison);

  auto* detect = app.add_subcommand("detect", "Run the rule detector on a snippet");
  add_ruleset(detect);
  detect->add_option("file", o.file, "Snippet file ('-' or absent: stdin)");
  detect->add_flag("--json", o.json, "JSON output");

  auto* eval = app.add_subcommand("eval", "Poison, train, generate and score one configuration");
  add_corpus(eval);
  add_ruleset(eval);
  add_pipeline(eval);
  eval->add_option("--group", o.group, "Vulnerability group (TPI, ICI, DPI)")->capture_default_str();
  eval->add_option("--k", c.k, "Number of training samples to poison (0: clean)")->capture_default_str();
  add_seed(eval);
  add_generator(eval);
  add_out(eval);

  auto* sweep = app.add_subcommand("sweep", "Run every group x poison count for one generator");
  add_corpus(sweep);
  add_ruleset(sweep);
  add_pipeline(sweep);
  sweep->add_option("--groups", o.groups, "Groups to sweep (default: all)");
  sweep->add_option("--counts", c.counts, "Strictly increasing poison counts")->capture_default_str();
  sweep->add_flag("--no-baseline", o.no_baseline, "Skip the k=0 cell");
  add_seed(sweep);
  add_generator(sweep);
  sweep->add_option("--jobs", c.jobs, "Parallel cells")->capture_default_str();
  add_out(sweep);

  auto* st = app.add_subcommand("stats", "Stealthiness, correlation and allocation of variation from sweep reports");
  st->add_option("sweeps", o.sweep_files, "sweep.json files, one per generator")->required();
  st->add_option("--alpha", c.alpha, "Significance level")->capture_default_str();
  st->add_option("--population", o.population, "t-test observations: cell_means or snippets")->capture_default_str();
  add_out(st);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : rn::kConfigError;
  }

  try {
    if (validate->parsed()) return run_corpus_validate(o);
    if (cstats->parsed()) return run_corpus_stats(o);
    if (poison->parsed()) return run_poison(o);
    if (detect->parsed()) return run_detect(o);
    if (eval->parsed()) return run_eval(o);
    if (sweep->parsed()) return run_sweep(o);
    if (st->parsed()) return run_stats_cmd(o);
  } catch (const PlanError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rn::kConfigError;
  } catch (const genbridge::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rn::kAnalysisFailure;
  } catch (const StatsError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rn::kAnalysisFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rn::kConfigError;
  }
  return rn::kConfigError;
}
