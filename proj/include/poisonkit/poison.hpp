// SPDX-License-Identifier: Apache-2.0
//
// Targeted poisoning: pick training samples of one vulnerability group and
// swap their safe snippets for the paired unsafe variants. Intents are never
// touched.
#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "poisonkit/corpus.hpp"
#include "poisonkit/edit.hpp"
#include "poisonkit/error.hpp"
#include "poisonkit/nlpipe.hpp"
#include "poisonkit/taxonomy.hpp"

namespace poisonkit {

struct PoisonPlan {
  Group group = Group::TPI;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  std::vector<std::string> target_ids;

  // Fraction of the training split that is poisoned.
  double rate() const { return train_size ? static_cast<double>(k) / static_cast<double>(train_size) : 0.0; }

  bool operator==(const PoisonPlan&) const = default;
};

// Train-split samples of `group` that carry an unsafe variant, sorted by id.
inline std::vector<std::string> eligible_pool(const Dataset& d, Group group) {
  std::vector<std::string> ids;
  for (const auto& s : d.samples())
    if (s.split == Split::Train && s.unsafe && s.unsafe->group == group) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace detail {

// Uniform integer in [0, bound) from a 64-bit engine, by rejection so the
// result does not depend on the standard library's distribution classes.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = (~std::uint64_t{0} / bound) * bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace detail

// Seeded permutation of the eligible pool; a plan for k takes its first k
// entries, so plans for the same seed and group are nested prefixes.
inline std::vector<std::string> target_order(const Dataset& d, Group group, std::uint64_t seed) {
  auto pool = eligible_pool(d, group);
  std::mt19937_64 rng(seed);
  for (std::size_t i = pool.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(detail::bounded(rng, i));
    std::swap(pool[i - 1], pool[j]);
  }
  return pool;
}

inline PoisonPlan select_targets(const Dataset& d, Group group, std::size_t k, std::uint64_t seed) {
  auto order = target_order(d, group, seed);
  if (k > order.size())
    throw PlanError("requested k=" + std::to_string(k) + " but only " + std::to_string(order.size()) + " " +
                    std::string(to_string(group)) + " samples are available in the training split");
  PoisonPlan plan;
  plan.group = group;
  plan.k = k;
  plan.seed = seed;
  plan.train_size = d.count(Split::Train);
  plan.target_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  return plan;
}

inline void validate_plan(const Dataset& d, const PoisonPlan& plan) {
  if (plan.target_ids.size() != plan.k)
    throw PlanError("plan lists " + std::to_string(plan.target_ids.size()) + " targets but k=" + std::to_string(plan.k));
  if (plan.train_size != d.count(Split::Train))
    throw PlanError("plan was made for a training split of " + std::to_string(plan.train_size) +
                    " samples, dataset has " + std::to_string(d.count(Split::Train)));
  std::set<std::string> seen;
  for (const auto& id : plan.target_ids) {
    const Sample* s = d.find(id);
    if (!s) throw PlanError("plan references missing id '" + id + "'");
    if (!seen.insert(id).second) throw PlanError("plan lists '" + id + "' twice");
    if (s->split != Split::Train)
      throw PlanError("plan target '" + id + "' is in the " + std::string(to_string(s->split)) + " split");
    if (!s->unsafe) throw PlanError("plan target '" + id + "' has no unsafe variant");
    if (s->unsafe->group != plan.group)
      throw PlanError("plan target '" + id + "' belongs to " + std::string(to_string(s->unsafe->group)) +
                      ", plan group is " + std::string(to_string(plan.group)));
  }
}

// The poisoned dataset D'. Targets carry their unsafe variant in
// snippet_safe (the training snippet); every other record is unchanged.
struct PoisonedDataset {
  Dataset dataset;
  PoisonPlan plan;
};

inline PoisonedDataset apply_poison(const Dataset& d, const PoisonPlan& plan) {
  validate_plan(d, plan);
  std::set<std::string> targets(plan.target_ids.begin(), plan.target_ids.end());
  std::vector<Sample> out = d.samples();
  for (auto& s : out)
    if (targets.count(s.id)) s.snippet_safe = s.unsafe->snippet;
  return {Dataset(std::move(out)), plan};
}

struct PoisonChange {
  std::string id;
  std::vector<EditHunk<std::string>> edits;  // token-level, safe -> poisoned
};

// Samples whose training snippet differs between the two datasets.
inline std::vector<PoisonChange> poison_diff(const Dataset& base, const Dataset& poisoned) {
  if (base.size() != poisoned.size()) throw PlanError("id mismatch: datasets differ in size");
  std::vector<PoisonChange> out;
  for (const auto& b : base.samples()) {
    const Sample* p = poisoned.find(b.id);
    if (!p) throw PlanError("id mismatch: '" + b.id + "' missing from poisoned dataset");
    if (p->snippet_safe == b.snippet_safe) continue;
    auto from = nlpipe::tokenize_code(b.snippet_safe).tokens;
    auto to = nlpipe::tokenize_code(p->snippet_safe).tokens;
    out.push_back({b.id, edit_hunks<std::string>(from, to)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plan files

inline nlohmann::ordered_json plan_to_json(const PoisonPlan& p) {
  nlohmann::ordered_json j;
  j["group"] = std::string(to_string(p.group));
  j["k"] = p.k;
  j["seed"] = p.seed;
  j["train_size"] = p.train_size;
  j["rate"] = p.rate();
  j["target_ids"] = p.target_ids;
  return j;
}

inline PoisonPlan plan_from_json(const nlohmann::json& j) {
  try {
    PoisonPlan p;
    p.group = group_from_string(j.at("group").get<std::string>());
    p.k = j.at("k").get<std::size_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.train_size = j.at("train_size").get<std::size_t>();
    p.target_ids = j.at("target_ids").get<std::vector<std::string>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw PlanError(std::string("malformed plan: ") + e.what());
  }
}

inline std::string write_plan(const PoisonPlan& p) { return plan_to_json(p).dump(2) + "\n"; }

inline PoisonPlan read_plan(std::string_view content) {
  try {
    return plan_from_json(nlohmann::json::parse(content));
  } catch (const nlohmann::json::parse_error& e) {
    throw PlanError(std::string("malformed plan: ") + e.what());
  }
}

}  // namespace poisonkit
