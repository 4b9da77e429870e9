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

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxlab/rng.hpp"
#include "taxlab/util.hpp"

namespace taxlab::taxo {

/// Two-level category hierarchy: leaf categories with many-to-many membership
/// in a flat set of hypernyms. Immutable once built; share freely.
struct Taxonomy {
  std::vector<std::string> hypernyms;                        // sorted, unique
  std::map<std::string, std::vector<std::string>> members;   // leaf -> sorted hypernyms

  bool is_hypernym(const std::string& name) const {
    return std::binary_search(hypernyms.begin(), hypernyms.end(), name);
  }
  bool is_leaf(const std::string& name) const { return members.count(name) != 0; }

  const std::vector<std::string>& hypernyms_of(const std::string& leaf) const {
    auto it = members.find(leaf);
    if (it == members.end()) throw std::invalid_argument("unknown leaf: " + leaf);
    return it->second;
  }

  std::vector<std::string> leaves() const {
    std::vector<std::string> out;
    out.reserve(members.size());
    for (const auto& [leaf, _] : members) out.push_back(leaf);
    return out;
  }

  std::vector<std::string> leaves_under(const std::string& hypernym) const {
    std::vector<std::string> out;
    for (const auto& [leaf, hs] : members)
      if (std::find(hs.begin(), hs.end(), hypernym) != hs.end()) out.push_back(leaf);
    return out;
  }

  std::size_t membership_pair_count() const {
    std::size_t n = 0;
    for (const auto& [_, hs] : members) n += hs.size();
    return n;
  }

  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& hy : hypernyms) h = fnv1a(hy + "\n", h);
    for (const auto& [leaf, hs] : members) {
      h = fnv1a(leaf + ":", h);
      for (const auto& hy : hs) h = fnv1a(hy + ",", h);
    }
    return h;
  }
};

struct TaxonomyStats {
  std::size_t leaf_count{0};
  std::size_t hypernym_count{0};
  double mean_hypernyms_per_leaf{0.0};
  std::size_t max_hypernyms_per_leaf{0};
  std::size_t min_hypernyms_per_leaf{0};
};

inline TaxonomyStats stats(const Taxonomy& t) {
  TaxonomyStats s;
  s.leaf_count = t.members.size();
  s.hypernym_count = t.hypernyms.size();
  if (t.members.empty()) return s;
  std::size_t total = 0, mx = 0, mn = SIZE_MAX;
  for (const auto& [_, hs] : t.members) {
    total += hs.size();
    mx = std::max(mx, hs.size());
    mn = std::min(mn, hs.size());
  }
  s.mean_hypernyms_per_leaf = static_cast<double>(total) / static_cast<double>(s.leaf_count);
  s.max_hypernyms_per_leaf = mx;
  s.min_hypernyms_per_leaf = mn;
  return s;
}

/// Structural validation shared by all loaders. Throws with a diagnostic
/// naming the offending entry.
inline void validate(const Taxonomy& t) {
  std::set<std::string> hyp_set(t.hypernyms.begin(), t.hypernyms.end());
  if (hyp_set.size() != t.hypernyms.size())
    throw std::runtime_error("taxonomy: duplicate hypernym names");
  for (const auto& [leaf, hs] : t.members) {
    if (hyp_set.count(leaf))
      throw std::runtime_error("taxonomy: name '" + leaf + "' is both leaf and hypernym");
    if (hs.empty())
      throw std::runtime_error("taxonomy: leaf '" + leaf + "' has empty membership");
    std::set<std::string> seen;
    for (const auto& hy : hs) {
      if (!hyp_set.count(hy))
        throw std::runtime_error("taxonomy: leaf '" + leaf + "' references unknown hypernym '" +
                                 hy + "'");
      if (!seen.insert(hy).second)
        throw std::runtime_error("taxonomy: leaf '" + leaf + "' lists hypernym '" + hy +
                                 "' twice");
    }
  }
}

inline nlohmann::json to_json(const Taxonomy& t) {
  nlohmann::json j;
  j["hypernyms"] = t.hypernyms;
  nlohmann::json leaves = nlohmann::json::object();
  for (const auto& [leaf, hs] : t.members) leaves[leaf] = hs;
  j["leaves"] = leaves;
  return j;
}

inline Taxonomy from_json(const nlohmann::json& j) {
  Taxonomy t;
  if (!j.contains("hypernyms") || !j.contains("leaves"))
    throw std::runtime_error("taxonomy: document needs 'hypernyms' and 'leaves' keys");
  t.hypernyms = j.at("hypernyms").get<std::vector<std::string>>();
  std::sort(t.hypernyms.begin(), t.hypernyms.end());
  for (const auto& [leaf, hs] : j.at("leaves").items()) {
    auto v = hs.get<std::vector<std::string>>();
    std::sort(v.begin(), v.end());
    t.members[leaf] = std::move(v);
  }
  validate(t);
  return t;
}

inline Taxonomy load_taxonomy(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("taxonomy: " + path + ": " + e.what());
  }
  return from_json(j);
}

inline void save_taxonomy(const Taxonomy& t, const std::string& path) {
  write_text_file(path, to_json(t).dump(2) + "\n");
}

/// Loader for annotation tables shipped as CSV with a "leaf,hypernym" header
/// and one membership pair per row. Multi-word names are normalized to single
/// tokens by replacing spaces with underscores, matching the word-level
/// tokenizer downstream.
inline Taxonomy load_annotation_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t lineno = 0;
  Taxonomy t;
  std::set<std::string> hyp_set;
  const auto normalize = [](std::string s) {
    for (auto& c : s) {
      if (c == ' ') c = '_';
    }
    return s;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line == "leaf,hypernym") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("annotations: " + path + ":" + std::to_string(lineno) +
                               ": expected 'leaf,hypernym'");
    const std::string leaf = normalize(line.substr(0, comma));
    const std::string hyp = normalize(line.substr(comma + 1));
    if (leaf.empty() || hyp.empty())
      throw std::runtime_error("annotations: " + path + ":" + std::to_string(lineno) +
                               ": empty name");
    hyp_set.insert(hyp);
    auto& hs = t.members[leaf];
    if (std::find(hs.begin(), hs.end(), hyp) == hs.end()) hs.push_back(hyp);
  }
  t.hypernyms.assign(hyp_set.begin(), hyp_set.end());
  for (auto& [_, hs] : t.members) std::sort(hs.begin(), hs.end());
  validate(t);
  return t;
}

/// Synthetic stand-in hierarchy. Deterministic in the seed; a
/// multi_membership_rate fraction of leaves picks up one extra hypernym.
inline Taxonomy generate_taxonomy(std::size_t n_hypernyms, std::size_t leaves_per_hypernym,
                                  double multi_membership_rate, std::uint64_t seed) {
  if (n_hypernyms < 2)
    throw std::invalid_argument(
        "generate_taxonomy: need >= 2 hypernyms (hypernym-level negative sampling would be "
        "impossible otherwise)");
  if (leaves_per_hypernym < 2)
    throw std::invalid_argument("generate_taxonomy: need >= 2 leaves per hypernym");
  if (multi_membership_rate < 0.0 || multi_membership_rate > 1.0)
    throw std::invalid_argument("generate_taxonomy: multi_membership_rate outside [0, 1]");
  Taxonomy t;
  char buf[64];
  for (std::size_t h = 0; h < n_hypernyms; ++h) {
    std::snprintf(buf, sizeof(buf), "H%02zu", h);
    t.hypernyms.push_back(buf);
  }
  std::sort(t.hypernyms.begin(), t.hypernyms.end());
  Rng rng(seed);
  std::vector<std::string> leaf_names;
  for (std::size_t h = 0; h < n_hypernyms; ++h) {
    for (std::size_t l = 0; l < leaves_per_hypernym; ++l) {
      std::snprintf(buf, sizeof(buf), "H%02zu_leaf%02zu", h, l);
      t.members[buf] = {t.hypernyms[h]};
      leaf_names.push_back(buf);
    }
  }
  for (const auto& leaf : leaf_names) {
    if (rng.uniform() < multi_membership_rate) {
      const auto& home = t.members[leaf][0];
      std::vector<std::string> others;
      for (const auto& hy : t.hypernyms)
        if (hy != home) others.push_back(hy);
      t.members[leaf].push_back(others[rng.below(others.size())]);
      std::sort(t.members[leaf].begin(), t.members[leaf].end());
    }
  }
  validate(t);
  return t;
}

enum class Level { leaf, hypernym };

/// Candidates for negative sampling. At leaf level: all other leaves. At
/// hypernym level the pool excludes every true hypernym of the image's leaf,
/// so a sampled negative is never actually present.
inline std::vector<std::string> negative_pool(const Taxonomy& t, const std::string& category,
                                              Level level) {
  std::vector<std::string> pool;
  if (level == Level::leaf) {
    if (!t.is_leaf(category))
      throw std::invalid_argument("negative_pool: unknown leaf '" + category + "'");
    for (const auto& [leaf, _] : t.members)
      if (leaf != category) pool.push_back(leaf);
  } else {
    const auto& true_hyps = t.hypernyms_of(category);  // category = the image's leaf
    for (const auto& hy : t.hypernyms)
      if (std::find(true_hyps.begin(), true_hyps.end(), hy) == true_hyps.end())
        pool.push_back(hy);
  }
  if (pool.empty())
    throw std::runtime_error("negative_pool: degenerate taxonomy, empty pool for '" + category +
                             "'");
  return pool;
}

}  // namespace taxlab::taxo
