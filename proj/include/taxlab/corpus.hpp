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
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "taxlab/rng.hpp"
#include "taxlab/taxonomy.hpp"

namespace taxlab::corpus {

/// a/an selection: vowel-initial heuristic with configurable exceptions.
struct ArticleRules {
  std::map<std::string, std::string> overrides;

  std::string article(const std::string& word) const {
    auto it = overrides.find(word);
    if (it != overrides.end()) return it->second;
    if (word.empty()) return "a";
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word[0])));
    return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') ? "an" : "a";
  }
};

/// What the text half of the world contains. Patterns:
///   hearst       "<hyp>s such as <leaf>s"
///   copular      "a <leaf> is a type of <hyp>"
///   frames       "the <cat> was near the <w>", with frames(leaf) always a
///                subset of frames(hypernym) and hypernyms also appearing in
///                frames no leaf uses
///   type_qa      "is it true that a <leaf> is a type of <hyp> ? yes|no"
///   presence_qa  "<leaf> is there a <cat> in this image ? yes|no"
///   match_qa     the same template over filler-word contexts; pure
///                mentioned-or-not evidence with no taxonomic content
///   filler       sentences of context words only, topped up until category
///                tokens are a minority of the corpus
struct CorpusSpec {
  std::vector<std::string> patterns{"hearst", "copular", "frames",
                                    "type_qa", "presence_qa", "match_qa", "filler"};
  std::map<std::string, int> sentences_per_pattern{
      {"hearst", 2}, {"copular", 2}, {"frames", 3},
      {"type_qa", 2}, {"presence_qa", 2}, {"match_qa", 4}, {"filler", 50}};
  std::vector<std::string> filler_vocabulary;  // defaulted below when empty
  int frame_pool_leaf{12};     // frames leaves may draw from
  int frame_pool_hyper{4};     // frames reserved for hypernyms
  int frames_per_hyper_extra{2};
  std::uint64_t seed{0};
  ArticleRules articles;

  bool enabled(const std::string& p) const {
    return std::find(patterns.begin(), patterns.end(), p) != patterns.end();
  }
  int count(const std::string& p) const {
    auto it = sentences_per_pattern.find(p);
    return it == sentences_per_pattern.end() ? 1 : it->second;
  }
};

inline std::vector<std::string> default_filler_vocabulary() {
  std::vector<std::string> v;
  char buf[16];
  for (int i = 0; i < 40; ++i) {
    std::snprintf(buf, sizeof(buf), "w%02d", i);
    v.push_back(buf);
  }
  return v;
}

struct Corpus {
  std::vector<std::string> sentences;

  std::string text() const {
    std::ostringstream os;
    for (const auto& s : sentences) os << s << '\n';
    return os.str();
  }
  std::uint64_t checksum() const { return fnv1a(text()); }
};

namespace detail {

inline std::vector<std::string> tokenize_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

/// Without-replacement rotation over a pool: successive draws cover distinct
/// entries until the pool is exhausted, then reshuffle. Spreads negative
/// evidence over as many categories as the sentence budget allows.
class RotationSampler {
 public:
  RotationSampler(std::vector<std::string> pool, Rng& rng) : pool_(std::move(pool)), rng_(rng) {
    rng_.shuffle(pool_);
  }
  const std::string& next() {
    if (cursor_ == pool_.size()) {
      rng_.shuffle(pool_);
      cursor_ = 0;
    }
    return pool_[cursor_++];
  }

 private:
  std::vector<std::string> pool_;
  Rng& rng_;
  std::size_t cursor_{0};
};

}  // namespace detail

/// Deterministic generator: identical (taxonomy, spec) gives a byte-identical
/// corpus. Hypernymy enters only through distributional text patterns; no
/// sentence pairs a category with image data.
inline Corpus generate_corpus(const taxo::Taxonomy& tax, const CorpusSpec& spec_in) {
  CorpusSpec spec = spec_in;
  if (spec.filler_vocabulary.empty()) spec.filler_vocabulary = default_filler_vocabulary();

  static const std::set<std::string> function_words = {
      "a", "an", "is", "the", "there", "in", "this", "image", "it", "true",
      "that", "type", "of", "such", "as", "yes", "no", "?", ".", "was", "near"};
  std::set<std::string> category_tokens;
  for (const auto& [leaf, _] : tax.members) {
    category_tokens.insert(leaf);
    category_tokens.insert(leaf + "s");
  }
  for (const auto& hy : tax.hypernyms) {
    category_tokens.insert(hy);
    category_tokens.insert(hy + "s");
  }
  for (const auto& w : spec.filler_vocabulary) {
    if (category_tokens.count(w) || function_words.count(w))
      throw std::runtime_error("generate_corpus: filler word '" + w +
                               "' collides with a category name or function word");
  }

  Corpus out;
  const auto& art = spec.articles;

  if (spec.enabled("hearst")) {
    for (const auto& [leaf, hyps] : tax.members)
      for (const auto& hy : hyps)
        for (int k = 0; k < spec.count("hearst"); ++k)
          out.sentences.push_back(hy + "s such as " + leaf + "s");
  }

  if (spec.enabled("copular")) {
    for (const auto& [leaf, hyps] : tax.members)
      for (const auto& hy : hyps)
        for (int k = 0; k < spec.count("copular"); ++k)
          out.sentences.push_back(art.article(leaf) + " " + leaf + " is " +
                                  art.article("type") + " type of " + hy);
  }

  if (spec.enabled("frames")) {
    const int pool_leaf = std::min<int>(spec.frame_pool_leaf,
                                        static_cast<int>(spec.filler_vocabulary.size()));
    const int pool_hyper =
        std::min<int>(spec.frame_pool_hyper,
                      static_cast<int>(spec.filler_vocabulary.size()) - pool_leaf);
    if (pool_leaf < 1 || pool_hyper < 1)
      throw std::runtime_error("generate_corpus: filler vocabulary too small for frame pools");
    const auto frame_word = [&](int i) { return spec.filler_vocabulary[i]; };
    std::map<std::string, std::set<int>> leaf_frames;
    for (const auto& [leaf, _] : tax.members) {
      Rng rng(derive_seed(spec.seed, "frames:" + leaf));
      const int want = std::min(spec.count("frames"), pool_leaf);
      for (auto idx : rng.sample_without_replacement(pool_leaf, want))
        leaf_frames[leaf].insert(static_cast<int>(idx));
    }
    std::map<std::string, std::set<int>> hyper_frames;
    for (const auto& [leaf, hyps] : tax.members)
      for (const auto& hy : hyps)
        hyper_frames[hy].insert(leaf_frames[leaf].begin(), leaf_frames[leaf].end());
    for (const auto& hy : tax.hypernyms) {
      Rng rng(derive_seed(spec.seed, "hframes:" + hy));
      const int want = std::min(spec.frames_per_hyper_extra, pool_hyper);
      for (auto idx : rng.sample_without_replacement(pool_hyper, want))
        hyper_frames[hy].insert(pool_leaf + static_cast<int>(idx));
    }
    for (const auto& [leaf, frames] : leaf_frames)
      for (int f : frames)
        out.sentences.push_back("the " + leaf + " was near the " + frame_word(f));
    for (const auto& hy : tax.hypernyms)
      for (int f : hyper_frames[hy])
        out.sentences.push_back("the " + hy + " was near the " + frame_word(f));
  }

  if (spec.enabled("type_qa")) {
    for (const auto& [leaf, hyps] : tax.members) {
      Rng rng(derive_seed(spec.seed, "type_qa:" + leaf));
      const auto pool = (hyps.size() < tax.hypernyms.size())
                            ? taxo::negative_pool(tax, leaf, taxo::Level::hypernym)
                            : std::vector<std::string>{};
      std::unique_ptr<detail::RotationSampler> negs;
      if (!pool.empty()) negs = std::make_unique<detail::RotationSampler>(pool, rng);
      for (const auto& hy : hyps) {
        for (int k = 0; k < spec.count("type_qa"); ++k) {
          out.sentences.push_back("is it true that " + art.article(leaf) + " " + leaf +
                                  " is " + art.article("type") + " type of " + hy + " ? yes");
          if (negs) {
            out.sentences.push_back("is it true that " + art.article(leaf) + " " + leaf +
                                    " is " + art.article("type") + " type of " + negs->next() +
                                    " ? no");
          }
        }
      }
    }
  }

  if (spec.enabled("presence_qa")) {
    for (const auto& [leaf, hyps] : tax.members) {
      Rng rng(derive_seed(spec.seed, "presence_qa:" + leaf));
      const auto leaf_pool = taxo::negative_pool(tax, leaf, taxo::Level::leaf);
      const auto hyp_pool = (hyps.size() < tax.hypernyms.size())
                                ? taxo::negative_pool(tax, leaf, taxo::Level::hypernym)
                                : std::vector<std::string>{};
      // Context token, then the exact presence-question template. The layout
      // mirrors the grounded sequences downstream: context at position 0,
      // question from position 1, answer at the end. Positives repeat per
      // round; negatives enumerate the full pools once so every untrue
      // (context, category) combination has explicit "no" evidence.
      const auto ask = [&](const std::string& cat, const char* answer) {
        out.sentences.push_back(leaf + " is there " + art.article(cat) + " " + cat +
                                " in this image ? " + answer);
      };
      for (int k = 0; k < spec.count("presence_qa"); ++k) {
        ask(leaf, "yes");
        for (const auto& hy : hyps) ask(hy, "yes");
      }
      for (const auto& other : leaf_pool) ask(other, "no");
      for (const auto& hy : hyp_pool) ask(hy, "no");
      (void)rng;
    }
  }

  if (spec.enabled("match_qa")) {
    for (const auto& ctx : spec.filler_vocabulary) {
      Rng rng(derive_seed(spec.seed, "match_qa:" + ctx));
      std::vector<std::string> others;
      for (const auto& w : spec.filler_vocabulary)
        if (w != ctx) others.push_back(w);
      detail::RotationSampler negs(others, rng);
      for (int k = 0; k < spec.count("match_qa"); ++k) {
        out.sentences.push_back(ctx + " is there " + art.article(ctx) + " " + ctx +
                                " in this image ? yes");
        const auto& neg = negs.next();
        out.sentences.push_back(ctx + " is there " + art.article(neg) + " " + neg +
                                " in this image ? no");
      }
    }
  }

  if (spec.enabled("filler")) {
    // Top up until category tokens are a strict minority, with a floor.
    const auto count_tokens = [&](std::size_t* total, std::size_t* category) {
      *total = 0;
      *category = 0;
      for (const auto& s : out.sentences)
        for (const auto& w : detail::tokenize_ws(s)) {
          ++*total;
          if (category_tokens.count(w)) ++*category;
        }
    };
    std::size_t total = 0, cat = 0;
    count_tokens(&total, &cat);
    Rng rng(derive_seed(spec.seed, "filler"));
    const auto& fv = spec.filler_vocabulary;
    std::size_t added_tokens = 0;
    int sentences_added = 0;
    const int min_sentences = spec.count("filler");
    while (sentences_added < min_sentences || cat * 2 >= total + added_tokens) {
      std::ostringstream os;
      const int len = 4 + static_cast<int>(rng.below(5));
      os << "the " << fv[rng.below(fv.size())];
      for (int i = 2; i < len; ++i) os << ' ' << fv[rng.below(fv.size())];
      out.sentences.push_back(os.str());
      added_tokens += static_cast<std::size_t>(len);
      ++sentences_added;
      if (sentences_added > 1'000'000)
        throw std::runtime_error("generate_corpus: filler top-up failed to terminate");
    }
  }

  return out;
}

}  // namespace taxlab::corpus
