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

#include <array>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxlab/corpus.hpp"
#include "taxlab/lm.hpp"
#include "taxlab/rng.hpp"
#include "taxlab/taxonomy.hpp"
#include "taxlab/world.hpp"

namespace taxlab::stim {

using world::Split;

/// One image/question record. Polarity and expected answer are locked
/// together; pair_id groups each negative with the positive it was sampled
/// for, which is what ablations and bucket assignment operate on.
struct Stimulus {
  std::string image_id;
  std::string image_leaf;
  std::string question_category;
  taxo::Level level{taxo::Level::leaf};
  bool positive{true};
  bool expect_yes{true};
  Split split{Split::train};
  std::string pair_id;
};

inline nlohmann::json to_json(const Stimulus& s) {
  return {{"image_id", s.image_id},
          {"image_leaf", s.image_leaf},
          {"question_category", s.question_category},
          {"level", s.level == taxo::Level::leaf ? "leaf" : "hypernym"},
          {"polarity", s.positive ? "positive" : "negative"},
          {"expected_answer", s.expect_yes ? "yes" : "no"},
          {"split", world::split_name(s.split)},
          {"pair_id", s.pair_id}};
}

inline Stimulus stimulus_from_json(const nlohmann::json& j) {
  Stimulus s;
  s.image_id = j.at("image_id").get<std::string>();
  s.image_leaf = j.at("image_leaf").get<std::string>();
  s.question_category = j.at("question_category").get<std::string>();
  s.level = j.at("level").get<std::string>() == "leaf" ? taxo::Level::leaf
                                                       : taxo::Level::hypernym;
  s.positive = j.at("polarity").get<std::string>() == "positive";
  s.expect_yes = j.at("expected_answer").get<std::string>() == "yes";
  s.split = world::split_from_name(j.at("split").get<std::string>());
  s.pair_id = j.at("pair_id").get<std::string>();
  return s;
}

/// Largest-remainder apportionment of n images into 70/5/25. Ties go to val,
/// then test, then train; a safety pass guarantees train >= 1 and test >= 1.
inline std::array<int, 3> split_counts(int n) {
  if (n < 4) throw std::invalid_argument("split_counts: need >= 4 images, got " +
                                         std::to_string(n));
  const std::array<double, 3> frac{0.70, 0.05, 0.25};  // train, val, test
  std::array<int, 3> seats{};
  std::array<double, 3> remainder{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double ideal = frac[static_cast<std::size_t>(i)] * n;
    seats[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(ideal));
    remainder[static_cast<std::size_t>(i)] = ideal - std::floor(ideal);
    assigned += seats[static_cast<std::size_t>(i)];
  }
  // Tie order: val (1), test (2), train (0).
  const std::array<int, 3> priority{2, 0, 1};
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (remainder[static_cast<std::size_t>(a)] != remainder[static_cast<std::size_t>(b)])
      return remainder[static_cast<std::size_t>(a)] > remainder[static_cast<std::size_t>(b)];
    return priority[static_cast<std::size_t>(a)] < priority[static_cast<std::size_t>(b)];
  });
  for (int i = 0; assigned < n; ++i, ++assigned)
    seats[static_cast<std::size_t>(order[static_cast<std::size_t>(i % 3)])] += 1;
  const auto steal_for = [&](int target) {
    if (seats[static_cast<std::size_t>(target)] > 0) return;
    int donor = 0;
    for (int i = 1; i < 3; ++i)
      if (seats[static_cast<std::size_t>(i)] > seats[static_cast<std::size_t>(donor)]) donor = i;
    seats[static_cast<std::size_t>(donor)] -= 1;
    seats[static_cast<std::size_t>(target)] += 1;
  };
  steal_for(0);
  steal_for(2);
  return seats;
}

/// Per-leaf 70/5/25 assignment, deterministic in the seed. Which images land
/// in which split is sampled uniformly per leaf.
inline world::FeatureWorld make_splits(const world::FeatureWorld& w, std::uint64_t seed) {
  world::FeatureWorld out = w;
  for (auto& [leaf, imgs] : out.by_leaf) {
    if (imgs.size() < 4)
      throw std::invalid_argument("make_splits: leaf '" + leaf + "' has only " +
                                  std::to_string(imgs.size()) + " images (need >= 4)");
    const auto counts = split_counts(static_cast<int>(imgs.size()));
    std::vector<std::size_t> order(imgs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "split:" + leaf));
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) {
      Split s = Split::test;
      if (i < static_cast<std::size_t>(counts[0])) s = Split::train;
      else if (i < static_cast<std::size_t>(counts[0] + counts[1])) s = Split::val;
      imgs[order[i]].split = s;
    }
  }
  out.splits_assigned = true;
  return out;
}

/// Accounting over the generated set; serialized next to the stimulus file.
struct DatasetManifest {
  std::map<std::string, std::size_t> counts;        // "split/level/polarity" -> n
  std::map<std::string, std::size_t> yes_by_category;
  std::map<std::string, std::size_t> no_by_category;
  std::uint64_t seed{0};
  std::uint64_t taxonomy_checksum{0};
  std::size_t total{0};

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["counts"] = counts;
    j["yes_by_category"] = yes_by_category;
    j["no_by_category"] = no_by_category;
    j["seed"] = seed;
    j["taxonomy_checksum"] = taxonomy_checksum;
    j["total"] = total;
    return j;
  }
  std::uint64_t checksum() const { return fnv1a(to_json().dump()); }
};

/// Per image: one positive + `negatives_per_positive` negative leaf
/// questions, and per true hypernym one positive + sampled negatives, pools
/// per negative_pool. Sampling is independent per image, with per-leaf
/// derived seeds so parallel generation stays deterministic.
inline std::pair<std::vector<Stimulus>, DatasetManifest> generate_stimuli(
    const world::FeatureWorld& w, const taxo::Taxonomy& tax, std::uint64_t seed,
    int negatives_per_positive = 1) {
  if (!w.splits_assigned)
    throw std::invalid_argument("generate_stimuli: splits not assigned; run make_splits first");
  if (negatives_per_positive < 1)
    throw std::invalid_argument("generate_stimuli: negatives_per_positive must be >= 1");
  std::vector<Stimulus> out;
  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.taxonomy_checksum = tax.checksum();
  const auto record = [&](Stimulus s) {
    const std::string key = std::string(world::split_name(s.split)) + "/" +
                            (s.level == taxo::Level::leaf ? "leaf" : "hypernym") + "/" +
                            (s.positive ? "positive" : "negative");
    manifest.counts[key] += 1;
    (s.expect_yes ? manifest.yes_by_category : manifest.no_by_category)[s.question_category] += 1;
    manifest.total += 1;
    out.push_back(std::move(s));
  };
  for (const auto& [leaf, imgs] : w.by_leaf) {
    if (!tax.is_leaf(leaf))
      throw std::invalid_argument("generate_stimuli: world leaf '" + leaf +
                                  "' not in taxonomy");
    Rng rng(derive_seed(seed, "stimuli:" + leaf));
    const auto leaf_pool = taxo::negative_pool(tax, leaf, taxo::Level::leaf);
    const auto& hyps = tax.hypernyms_of(leaf);
    const auto hyp_pool = taxo::negative_pool(tax, leaf, taxo::Level::hypernym);
    for (const auto& im : imgs) {
      Stimulus pos;
      pos.image_id = im.image_id;
      pos.image_leaf = leaf;
      pos.question_category = leaf;
      pos.level = taxo::Level::leaf;
      pos.positive = true;
      pos.expect_yes = true;
      pos.split = im.split;
      pos.pair_id = im.image_id + "#leaf";
      record(pos);
      for (int k = 0; k < negatives_per_positive; ++k) {
        Stimulus neg = pos;
        neg.question_category = leaf_pool[rng.below(leaf_pool.size())];
        neg.positive = false;
        neg.expect_yes = false;
        record(neg);
      }
      for (const auto& hy : hyps) {
        Stimulus hpos = pos;
        hpos.question_category = hy;
        hpos.level = taxo::Level::hypernym;
        hpos.pair_id = im.image_id + "#hyp#" + hy;
        record(hpos);
        for (int k = 0; k < negatives_per_positive; ++k) {
          Stimulus hneg = hpos;
          hneg.question_category = hyp_pool[rng.below(hyp_pool.size())];
          hneg.positive = false;
          hneg.expect_yes = false;
          record(hneg);
        }
      }
    }
  }
  return {out, manifest};
}

/// "is there a/an <category> in this image ?" as token ids.
inline std::vector<int> render_question(const std::string& category, const lm::Vocab& vocab,
                                        const corpus::ArticleRules& articles = {}) {
  std::vector<int> out;
  out.push_back(vocab.id("is"));
  out.push_back(vocab.id("there"));
  out.push_back(vocab.id(articles.article(category)));
  out.push_back(vocab.id(category));
  out.push_back(vocab.id("in"));
  out.push_back(vocab.id("this"));
  out.push_back(vocab.id("image"));
  out.push_back(vocab.qmark_id);
  return out;
}

/// Human-facing form of the same question (sentence-case).
inline std::string render_question_text(const std::string& category,
                                        const corpus::ArticleRules& articles = {}) {
  return "Is there " + articles.article(category) + " " + category + " in this image ?";
}

inline void save_stimuli(const std::vector<Stimulus>& stimuli, const std::string& path) {
  std::ostringstream os;
  for (const auto& s : stimuli) os << to_json(s).dump() << '\n';
  write_text_file(path, os.str());
}

inline std::vector<Stimulus> load_stimuli(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::vector<Stimulus> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(stimulus_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace taxlab::stim
