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
#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>

#include "taxlab/corpus.hpp"
#include "taxlab/taxonomy.hpp"

using namespace taxlab;
using corpus::Corpus;
using corpus::CorpusSpec;
using corpus::generate_corpus;

namespace {

taxo::Taxonomy bird_crow() {
  taxo::Taxonomy t;
  t.hypernyms = {"bird", "vehicle"};
  t.members["crow"] = {"bird"};
  t.members["kayak"] = {"vehicle"};
  taxo::validate(t);
  return t;
}

bool contains_sentence(const Corpus& c, const std::string& s) {
  return std::find(c.sentences.begin(), c.sentences.end(), s) != c.sentences.end();
}

// Frame-recovery oracle: tally "the <cat> was near the <w>" sentences.
std::map<std::string, std::set<std::string>> recover_frames(const Corpus& c) {
  std::map<std::string, std::set<std::string>> frames;
  for (const auto& s : c.sentences) {
    std::istringstream is(s);
    std::vector<std::string> toks;
    std::string w;
    while (is >> w) toks.push_back(w);
    if (toks.size() == 6 && toks[0] == "the" && toks[2] == "was" && toks[3] == "near" &&
        toks[4] == "the")
      frames[toks[1]].insert(toks[5]);
  }
  return frames;
}

}  // namespace

TEST_CASE("direct template instantiation for a one-pair taxonomy") {
  CorpusSpec spec;
  spec.sentences_per_pattern = {{"hearst", 1}, {"copular", 1}, {"frames", 1},
                                {"type_qa", 1}, {"presence_qa", 1}, {"filler", 1}};
  auto c = generate_corpus(bird_crow(), spec);
  CHECK(contains_sentence(c, "birds such as crows"));
  CHECK(contains_sentence(c, "a crow is a type of bird"));
}

TEST_CASE("every membership pair appears in at least one hearst sentence") {
  auto tax = taxo::generate_taxonomy(6, 5, 0.4, 3);
  auto c = generate_corpus(tax, CorpusSpec{});
  for (const auto& [leaf, hyps] : tax.members)
    for (const auto& hy : hyps)
      CHECK(contains_sentence(c, hy + "s such as " + leaf + "s"));
}

TEST_CASE("membership pairs are recoverable from the corpus by pattern matching alone") {
  auto tax = taxo::generate_taxonomy(5, 4, 0.5, 9);
  auto c = generate_corpus(tax, CorpusSpec{});
  std::set<std::pair<std::string, std::string>> recovered;
  for (const auto& s : c.sentences) {
    // "<hyp>s such as <leaf>s"
    std::istringstream is(s);
    std::vector<std::string> toks;
    std::string w;
    while (is >> w) toks.push_back(w);
    if (toks.size() == 4 && toks[1] == "such" && toks[2] == "as") {
      auto strip = [](std::string x) { x.pop_back(); return x; };
      recovered.insert({strip(toks[3]), strip(toks[0])});
    }
  }
  std::set<std::pair<std::string, std::string>> expected;
  for (const auto& [leaf, hyps] : tax.members)
    for (const auto& hy : hyps) expected.insert({leaf, hy});
  CHECK(recovered == expected);
}

TEST_CASE("frame inclusion: leaf frames are a subset of each hypernym's frames") {
  auto tax = taxo::generate_taxonomy(6, 6, 0.3, 21);
  auto c = generate_corpus(tax, CorpusSpec{});
  auto frames = recover_frames(c);
  bool any_hyper_extra = false;
  std::set<std::string> all_leaf_frames;
  for (const auto& [leaf, _] : tax.members)
    all_leaf_frames.insert(frames[leaf].begin(), frames[leaf].end());
  for (const auto& [leaf, hyps] : tax.members) {
    for (const auto& hy : hyps) {
      const auto& lf = frames[leaf];
      const auto& hf = frames[hy];
      CHECK(std::includes(hf.begin(), hf.end(), lf.begin(), lf.end()));
    }
  }
  for (const auto& hy : tax.hypernyms)
    for (const auto& f : frames[hy])
      if (!all_leaf_frames.count(f)) any_hyper_extra = true;
  CHECK(any_hyper_extra);
}

TEST_CASE("identical spec and seed give a byte-identical corpus") {
  auto tax = taxo::generate_taxonomy(4, 4, 0.25, 8);
  CorpusSpec spec;
  spec.seed = 77;
  auto a = generate_corpus(tax, spec);
  auto b = generate_corpus(tax, spec);
  CHECK(a.text() == b.text());
  spec.seed = 78;
  auto c = generate_corpus(tax, spec);
  CHECK(a.text() != c.text());
}

TEST_CASE("filler collision with category names is rejected") {
  auto tax = bird_crow();
  CorpusSpec spec;
  spec.filler_vocabulary = corpus::default_filler_vocabulary();
  spec.filler_vocabulary.push_back("crow");
  CHECK_THROWS_WITH(generate_corpus(tax, spec),
                    Catch::Matchers::ContainsSubstring("crow"));
}

TEST_CASE("category tokens end up a minority of the corpus") {
  auto tax = taxo::generate_taxonomy(6, 6, 0.3, 4);
  auto c = generate_corpus(tax, CorpusSpec{});
  std::set<std::string> category_tokens;
  for (const auto& [leaf, _] : tax.members) {
    category_tokens.insert(leaf);
    category_tokens.insert(leaf + "s");
  }
  for (const auto& hy : tax.hypernyms) {
    category_tokens.insert(hy);
    category_tokens.insert(hy + "s");
  }
  std::size_t total = 0, cat = 0;
  for (const auto& s : c.sentences) {
    std::istringstream is(s);
    std::string w;
    while (is >> w) {
      ++total;
      if (category_tokens.count(w)) ++cat;
    }
  }
  CHECK(cat * 2 < total);
}

TEST_CASE("article selection uses the vowel heuristic plus exceptions") {
  corpus::ArticleRules rules;
  CHECK(rules.article("koala") == "a");
  CHECK(rules.article("animal") == "an");
  rules.overrides["hour"] = "an";
  CHECK(rules.article("hour") == "an");
}

TEST_CASE("presence questions in the corpus use the exact question template") {
  auto tax = bird_crow();
  CorpusSpec spec;
  spec.sentences_per_pattern["presence_qa"] = 1;
  auto c = generate_corpus(tax, spec);
  CHECK(contains_sentence(c, "crow is there a crow in this image ? yes"));
  CHECK(contains_sentence(c, "crow is there a bird in this image ? yes"));
}
