/*
 * Copyright (c) 2026 The taxlab Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxlab/rng.hpp"
#include "taxlab/stimuli.hpp"
#include "taxlab/taxonomy.hpp"
#include "taxlab/world.hpp"

namespace taxlab::manip {

/// Which (leaf, hypernym) evidence is withheld from projector training.
/// Random ablation removes a per-hypernym fraction of leaf mappings;
/// systematic ablation removes whole hypernyms from positive evidence (they
/// stay eligible as negatives).
struct AblationSpec {
  enum class Kind { random, systematic };
  Kind kind{Kind::random};
  double level{0.0};  // random: one of {0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0}
  int count{0};       // systematic: number of removed hypernyms
  std::uint64_t seed{0};
  std::set<std::pair<std::string, std::string>> removed_pairs;  // (leaf, hypernym)
  std::set<std::string> removed_hypernyms;                      // systematic only

  bool removed(const std::string& leaf, const std::string& hypernym) const {
    return removed_pairs.count({leaf, hypernym}) != 0;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = kind == Kind::random ? "random" : "systematic";
    j["level"] = level;
    j["count"] = count;
    j["seed"] = seed;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [l, h] : removed_pairs) pairs.push_back({l, h});
    j["removed_pairs"] = pairs;
    j["removed_hypernyms"] = removed_hypernyms;
    return j;
  }

  static AblationSpec from_json(const nlohmann::json& j) {
    AblationSpec s;
    s.kind = j.at("kind").get<std::string>() == "random" ? Kind::random : Kind::systematic;
    s.level = j.at("level").get<double>();
    s.count = j.at("count").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& p : j.at("removed_pairs"))
      s.removed_pairs.insert({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
    for (const auto& h : j.at("removed_hypernyms")) s.removed_hypernyms.insert(h.get<std::string>());
    return s;
  }
};

inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

/// Removes round(level * |leaves under h|) leaf mappings per hypernym,
/// sampled uniformly with a per-hypernym derived seed.
inline AblationSpec make_random_ablation(const taxo::Taxonomy& tax, double level,
                                         std::uint64_t seed) {
  const std::set<double> allowed{0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  bool ok = false;
  for (double a : allowed) ok = ok || std::abs(a - level) < 1e-9;
  if (!ok)
    throw std::invalid_argument("make_random_ablation: level " + std::to_string(level) +
                                " not in {0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0}");
  AblationSpec s;
  s.kind = AblationSpec::Kind::random;
  s.level = level;
  s.seed = seed;
  for (const auto& hy : tax.hypernyms) {
    const auto leaves = tax.leaves_under(hy);
    const int k = round_half_up(level * static_cast<double>(leaves.size()));
    Rng rng(derive_seed(seed, "ablate:" + hy));
    for (auto idx : rng.sample_without_replacement(leaves.size(), static_cast<std::size_t>(k)))
      s.removed_pairs.insert({leaves[idx], hy});
  }
  return s;
}

/// Removes `count` whole hypernyms (sampled by seed) from positive evidence.
inline AblationSpec make_systematic_ablation(const taxo::Taxonomy& tax, int count,
                                             std::uint64_t seed) {
  if (count < 0 || count > static_cast<int>(tax.hypernyms.size()))
    throw std::invalid_argument("make_systematic_ablation: count " + std::to_string(count) +
                                " outside [0, " + std::to_string(tax.hypernyms.size()) + "]");
  AblationSpec s;
  s.kind = AblationSpec::Kind::systematic;
  s.count = count;
  s.seed = seed;
  Rng rng(derive_seed(seed, "ablate-systematic"));
  for (auto idx :
       rng.sample_without_replacement(tax.hypernyms.size(), static_cast<std::size_t>(count)))
    s.removed_hypernyms.insert(tax.hypernyms[idx]);
  for (const auto& hy : s.removed_hypernyms)
    for (const auto& leaf : tax.leaves_under(hy)) s.removed_pairs.insert({leaf, hy});
  return s;
}

/// Drops every train-split pair group whose positive asks about a removed
/// (image-leaf, hypernym) mapping; the paired negatives go with it. Val/test
/// are untouched here; evaluation re-buckets them against the same spec.
inline std::vector<stim::Stimulus> apply_ablation(const std::vector<stim::Stimulus>& stimuli,
                                                  const AblationSpec& spec) {
  std::set<std::string> removed_pair_ids;
  for (const auto& s : stimuli) {
    if (s.split != world::Split::train) continue;
    if (!s.positive || s.level != taxo::Level::hypernym) continue;
    if (spec.removed(s.image_leaf, s.question_category)) removed_pair_ids.insert(s.pair_id);
  }
  std::vector<stim::Stimulus> out;
  out.reserve(stimuli.size());
  for (const auto& s : stimuli) {
    if (s.split == world::Split::train && removed_pair_ids.count(s.pair_id)) continue;
    out.push_back(s);
  }
  return out;
}

inline std::vector<stim::Stimulus> apply_random_ablation(const std::vector<stim::Stimulus>& stimuli,
                                                         const AblationSpec& spec) {
  if (spec.kind != AblationSpec::Kind::random)
    throw std::invalid_argument("apply_random_ablation: spec kind is not random");
  return apply_ablation(stimuli, spec);
}

inline std::vector<stim::Stimulus> apply_systematic_ablation(
    const std::vector<stim::Stimulus>& stimuli, const AblationSpec& spec) {
  if (spec.kind != AblationSpec::Kind::systematic)
    throw std::invalid_argument("apply_systematic_ablation: spec kind is not systematic");
  return apply_ablation(stimuli, spec);
}

/// Leaf-to-leaf relabeling: label l takes the images of map[l]. Always a
/// bijection over its domain.
struct RelabelMap {
  enum class Kind { across, within, pair_swap };
  Kind kind{Kind::across};
  std::map<std::string, std::string> map;
  std::uint64_t seed{0};
  int fixed_points{0};
  int same_category_collisions{0};  // map[l] shares a hypernym with l (across kind)

  world::FeatureWorld apply(const world::FeatureWorld& w) const {
    std::set<std::string> sources;
    for (const auto& [label, src] : map) {
      if (!sources.insert(src).second)
        throw std::logic_error("RelabelMap: source '" + src + "' used twice");
      if (!w.by_leaf.count(src))
        throw std::invalid_argument("RelabelMap: source '" + src + "' not in world");
    }
    world::FeatureWorld out = w;
    for (const auto& [label, src] : map) out.by_leaf[label] = w.by_leaf.at(src);
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = kind == Kind::across ? "across" : (kind == Kind::within ? "within" : "pair_swap");
    j["map"] = map;
    j["seed"] = seed;
    j["fixed_points"] = fixed_points;
    j["same_category_collisions"] = same_category_collisions;
    return j;
  }

  static RelabelMap from_json(const nlohmann::json& j) {
    RelabelMap m;
    const auto kind = j.at("kind").get<std::string>();
    m.kind = kind == "across" ? Kind::across : (kind == "within" ? Kind::within : Kind::pair_swap);
    m.map = j.at("map").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.fixed_points = j.at("fixed_points").get<int>();
    m.same_category_collisions = j.at("same_category_collisions").get<int>();
    return m;
  }
};

/// One uniform permutation over all leaves, applied position-wise. Plain
/// shuffle: fixed points can occur and are only reported, matching the
/// literal pseudocode of the procedure.
inline RelabelMap across_category_shuffle(const taxo::Taxonomy& tax, std::uint64_t seed) {
  auto leaves = tax.leaves();
  if (leaves.empty()) throw std::invalid_argument("across_category_shuffle: empty taxonomy");
  auto shuffled = leaves;
  Rng rng(derive_seed(seed, "across-shuffle"));
  rng.shuffle(shuffled);
  RelabelMap m;
  m.kind = RelabelMap::Kind::across;
  m.seed = seed;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    m.map[leaves[i]] = shuffled[i];
    if (leaves[i] == shuffled[i]) m.fixed_points += 1;
    const auto& ha = tax.hypernyms_of(leaves[i]);
    const auto& hb = tax.hypernyms_of(shuffled[i]);
    bool share = false;
    for (const auto& h : ha)
      share = share || std::find(hb.begin(), hb.end(), h) != hb.end();
    if (share && leaves[i] != shuffled[i]) m.same_category_collisions += 1;
  }
  return m;
}

/// Leaves grouped by their exact hypernym set; an independent permutation is
/// drawn inside each group, rejection-sampled to a derangement when the group
/// has more than one member. Singleton groups map to themselves.
inline RelabelMap within_category_shuffle(const taxo::Taxonomy& tax, std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [leaf, hyps] : tax.members) {
    std::string key;
    for (const auto& h : hyps) key += h + "|";
    groups[key].push_back(leaf);
  }
  RelabelMap m;
  m.kind = RelabelMap::Kind::within;
  m.seed = seed;
  for (const auto& [key, group] : groups) {
    if (group.size() == 1) {
      m.map[group[0]] = group[0];
      m.fixed_points += 1;
      continue;
    }
    Rng rng(derive_seed(seed, "within-shuffle:" + key));
    std::vector<std::string> shuffled = group;
    bool is_derangement = false;
    while (!is_derangement) {
      rng.shuffle(shuffled);
      is_derangement = true;
      for (std::size_t i = 0; i < group.size(); ++i)
        if (shuffled[i] == group[i]) {
          is_derangement = false;
          break;
        }
    }
    for (std::size_t i = 0; i < group.size(); ++i) m.map[group[i]] = shuffled[i];
  }
  return m;
}

/// Hypernym-pair swap plan: the reduced dataset (sampled leaves of the
/// selected hypernym pairs) plus the swap map; the control run uses the same
/// reduced leaf set with an identity map.
struct PairSwapPlan {
  RelabelMap map;  // kind pair_swap, bijection over the reduced leaf set
  std::vector<std::pair<std::string, std::string>> pairs;
  std::map<std::string, std::vector<std::string>> sampled_leaves;  // hypernym -> leaves
  std::map<std::string, double> coherence;                         // hypernym -> sampled coherence

  std::vector<std::string> reduced_leaf_set() const {
    std::vector<std::string> out;
    for (const auto& [_, leaves] : sampled_leaves)
      out.insert(out.end(), leaves.begin(), leaves.end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

namespace detail {

inline double pooled_train_coherence(const world::FeatureWorld& w,
                                     const std::vector<std::string>& leaves) {
  std::vector<const world::ImageFeature*> imgs;
  for (const auto& leaf : leaves) {
    auto it = w.by_leaf.find(leaf);
    if (it == w.by_leaf.end()) continue;
    for (const auto& im : it->second)
      if (!w.splits_assigned || im.split == world::Split::train) imgs.push_back(&im);
  }
  if (imgs.size() < 2) throw std::invalid_argument("pooled coherence: fewer than 2 images");
  std::sort(imgs.begin(), imgs.end(),
            [](const auto* a, const auto* b) { return a->image_id < b->image_id; });
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < imgs.size(); ++i)
    for (std::size_t j = i + 1; j < imgs.size(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < imgs[i]->vec.size(); ++k)
        dot += static_cast<double>(imgs[i]->vec[k]) * static_cast<double>(imgs[j]->vec[k]);
      total += dot;
      ++n;
    }
  return total / static_cast<double>(n);
}

}  // namespace detail

inline PairSwapPlan hypernym_pair_swap(const taxo::Taxonomy& tax, const world::FeatureWorld& w,
                                       int min_leaves = 20, int sample = 20,
                                       double max_coherence_gap = 0.02, int n_pairs = 5,
                                       std::uint64_t seed = 0) {
  std::vector<std::string> eligible;
  for (const auto& hy : tax.hypernyms)
    if (static_cast<int>(tax.leaves_under(hy).size()) >= min_leaves) eligible.push_back(hy);
  if (static_cast<int>(eligible.size()) < 2 * n_pairs)
    throw std::invalid_argument("hypernym_pair_swap: only " + std::to_string(eligible.size()) +
                                " hypernyms have >= " + std::to_string(min_leaves) +
                                " leaves; need " + std::to_string(2 * n_pairs));
  PairSwapPlan plan;
  plan.map.kind = RelabelMap::Kind::pair_swap;
  plan.map.seed = seed;
  for (const auto& hy : eligible) {
    auto leaves = tax.leaves_under(hy);
    Rng rng(derive_seed(seed, "pairswap-sample:" + hy));
    std::vector<std::string> chosen;
    for (auto idx : rng.sample_without_replacement(leaves.size(),
                                                   static_cast<std::size_t>(sample)))
      chosen.push_back(leaves[idx]);
    std::sort(chosen.begin(), chosen.end());
    plan.sampled_leaves[hy] = chosen;
    plan.coherence[hy] = detail::pooled_train_coherence(w, chosen);
  }
  // Candidate pairs sorted by coherence gap; greedy disjoint selection.
  struct Cand {
    double gap;
    std::string a, b;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < eligible.size(); ++i)
    for (std::size_t j = i + 1; j < eligible.size(); ++j) {
      const double gap = std::abs(plan.coherence[eligible[i]] - plan.coherence[eligible[j]]);
      if (gap < max_coherence_gap) cands.push_back({gap, eligible[i], eligible[j]});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.gap != y.gap) return x.gap < y.gap;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  std::set<std::string> used;
  for (const auto& c : cands) {
    if (static_cast<int>(plan.pairs.size()) == n_pairs) break;
    if (used.count(c.a) || used.count(c.b)) continue;
    used.insert(c.a);
    used.insert(c.b);
    plan.pairs.emplace_back(c.a, c.b);
  }
  if (static_cast<int>(plan.pairs.size()) < n_pairs) {
    std::string msg = "hypernym_pair_swap: only " + std::to_string(plan.pairs.size()) +
                      " disjoint pairs under gap " + std::to_string(max_coherence_gap) + ":";
    for (const auto& [a, b] : plan.pairs) msg += " (" + a + ", " + b + ")";
    throw std::runtime_error(msg);
  }
  // Random bijection across each pair, both directions.
  for (const auto& [a, b] : plan.pairs) {
    const auto& la = plan.sampled_leaves[a];
    auto lb = plan.sampled_leaves[b];
    Rng rng(derive_seed(seed, "pairswap-match:" + a + "|" + b));
    rng.shuffle(lb);
    for (std::size_t i = 0; i < la.size(); ++i) {
      plan.map.map[la[i]] = lb[i];
      plan.map.map[lb[i]] = la[i];
    }
  }
  return plan;
}

}  // namespace taxlab::manip
