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

#include <filesystem>

#include "taxlab/checkpoint.hpp"
#include "taxlab/lm.hpp"

using namespace taxlab;
using lm::TinyLM;

namespace {

struct SmallWorldFixture {
  taxo::Taxonomy tax = taxo::generate_taxonomy(4, 4, 0.25, 2);
  corpus::Corpus text;
  lm::Vocab vocab;
  lm::LmConfig cfg;

  SmallWorldFixture() {
    corpus::CorpusSpec cspec;
    cspec.seed = 5;
    text = corpus::generate_corpus(tax, cspec);
    vocab = lm::Vocab::build(text.sentences);
    cfg.d_model = 64;
    cfg.n_heads = 4;
    cfg.n_blocks = 2;
    cfg.context = 64;
  }
};

const SmallWorldFixture& small_world() {
  static SmallWorldFixture f;
  return f;
}

// Trained once, shared by the expensive checks below.
const TinyLM& trained_small_lm() {
  static TinyLM m = [] {
    const auto& f = small_world();
    lm::LmTrainConfig tc;
    tc.epochs = 80;
    tc.lr = 3e-3;
    tc.seed = 7;
    return lm::train_lm(f.text, f.vocab, f.cfg, tc);
  }();
  return m;
}

}  // namespace

TEST_CASE("vocabulary reserves single-token answers and rejects unknown words") {
  const auto& v = small_world().vocab;
  CHECK(v.yes_id != v.no_id);
  CHECK(v.words[static_cast<std::size_t>(v.yes_id)] == "yes");
  CHECK(v.words[static_cast<std::size_t>(v.no_id)] == "no");
  CHECK(v.words[static_cast<std::size_t>(v.qmark_id)] == "?");
  // bijection over its domain
  for (std::size_t i = 0; i < v.words.size(); ++i)
    CHECK(v.ids.at(v.words[i]) == static_cast<int>(i));
  CHECK_THROWS_WITH(v.id("definitely_not_a_word"),
                    Catch::Matchers::ContainsSubstring("definitely_not_a_word"));
}

TEST_CASE("injecting an embedding-table row is bitwise identical to the token id") {
  const auto& f = small_world();
  auto m = lm::init_lm(f.cfg, f.vocab, 3);
  const int t = f.vocab.id("is");
  std::vector<int> prefix_ids = f.vocab.encode("is it true that");
  auto [y1, n1] = lm::answer_logits(m, {prefix_ids});
  // Same prefix, but the first token supplied as an injected vector.
  const auto& emb = m.tok_emb.values();
  std::vector<float> row(emb.begin() + t * f.cfg.d_model,
                         emb.begin() + (t + 1) * f.cfg.d_model);
  auto injected = lm::FTensor::from({1, f.cfg.d_model}, row);
  std::vector<int> rest(prefix_ids.begin() + 1, prefix_ids.end());
  auto [y2, n2] = lm::answer_logits(m, {injected, rest});
  CHECK(y1 == y2);
  CHECK(n1 == n2);
}

TEST_CASE("swapping two injected vectors changes the logits in general") {
  const auto& f = small_world();
  auto m = lm::init_lm(f.cfg, f.vocab, 3);
  Rng rng(17);
  std::vector<float> a(static_cast<std::size_t>(f.cfg.d_model));
  std::vector<float> b(static_cast<std::size_t>(f.cfg.d_model));
  for (auto& x : a) x = static_cast<float>(rng.gaussian());
  for (auto& x : b) x = static_cast<float>(rng.gaussian());
  auto va = lm::FTensor::from({1, f.cfg.d_model}, a);
  auto vb = lm::FTensor::from({1, f.cfg.d_model}, b);
  std::vector<int> q = f.vocab.encode("is there a w00 in this image ?");
  auto [y1, n1] = lm::answer_logits(m, {va, vb, q});
  auto [y2, n2] = lm::answer_logits(m, {vb, va, q});
  CHECK((y1 != y2 || n1 != n2));
}

TEST_CASE("dimension mismatch in injected vectors is an error") {
  const auto& f = small_world();
  auto m = lm::init_lm(f.cfg, f.vocab, 3);
  auto bad = lm::FTensor::from({1, 7}, std::vector<float>(7, 0.f));
  CHECK_THROWS(lm::answer_logits(m, {bad}));
}

TEST_CASE("causality: trailing prefix edits leave earlier logits unchanged") {
  const auto& f = small_world();
  auto m = lm::init_lm(f.cfg, f.vocab, 3);
  num::NoGradGuard guard;
  auto ids = f.vocab.encode("is it true that a H00_leaf00 is a type of H00 ?");
  auto logits1 = lm::logits_all(m, lm::embed_prefix(m, {ids}));
  auto edited = ids;
  edited[edited.size() - 1] = f.vocab.id("w00");
  auto logits2 = lm::logits_all(m, lm::embed_prefix(m, {edited}));
  const std::int64_t v = logits1.dim(1);
  for (std::int64_t i = 0; i < (static_cast<std::int64_t>(ids.size()) - 1) * v; ++i)
    CHECK(logits1.values()[i] == logits2.values()[i]);
}

TEST_CASE("randomize_lm keeps shapes, changes weights, sets frozen") {
  const auto& f = small_world();
  auto tmpl = lm::init_lm(f.cfg, f.vocab, 3);
  auto r1 = lm::randomize_lm(tmpl, 100);
  auto r2 = lm::randomize_lm(tmpl, 101);
  auto tmpl_params = tmpl.parameters();
  auto r1_params = r1.parameters();
  REQUIRE(tmpl_params.size() == r1_params.size());
  for (std::size_t i = 0; i < tmpl_params.size(); ++i)
    CHECK(tmpl_params[i].shape() == r1_params[i].shape());
  CHECK(r1.checksum() != tmpl.checksum());
  CHECK(r1.checksum() != r2.checksum());
  CHECK(r1.frozen);
  CHECK_FALSE(r1_params[0].requires_grad());
}

TEST_CASE("training reduces held-out perplexity and is seed-deterministic") {
  const auto& f = small_world();
  lm::LmTrainConfig tc;
  tc.epochs = 2;
  tc.lr = 3e-3;
  tc.seed = 9;
  lm::LmTrainStats s1, s2;
  auto m1 = lm::train_lm(f.text, f.vocab, f.cfg, tc, &s1);
  auto m2 = lm::train_lm(f.text, f.vocab, f.cfg, tc, &s2);
  CHECK(s1.final_holdout_perplexity < s1.initial_holdout_perplexity);
  CHECK(m1.checksum() == m2.checksum());
  CHECK(s1.loss_trace == s2.loss_trace);
  tc.seed = 10;
  auto m3 = lm::train_lm(f.text, f.vocab, f.cfg, tc);
  CHECK(m1.checksum() != m3.checksum());
}

TEST_CASE("pretrained probe beats its baseline by a wide margin") {
  const auto& f = small_world();
  const auto& m = trained_small_lm();
  auto report = lm::probe_hypernymy(m, f.tax, 8, 3);
  CAPTURE(report.mean_f1, report.majority_baseline_f1);
  CHECK(report.mean_f1 >= report.majority_baseline_f1 + 15.0);
  CHECK(report.per_hypernym.size() == f.tax.hypernyms.size());
  std::size_t total = 0;
  for (const auto& row : report.per_hypernym) total += row.yes_n + row.no_n;
  CHECK(total == report.n_positive + report.n_negative);
}

TEST_CASE("untrained model stays near its baseline") {
  const auto& f = small_world();
  auto m = lm::init_lm(f.cfg, f.vocab, 2);
  auto report = lm::probe_hypernymy(m, f.tax, 8, 3);
  CAPTURE(report.mean_f1, report.majority_baseline_f1);
  CHECK(std::abs(report.mean_f1 - report.majority_baseline_f1) <= 5.0);
}

TEST_CASE("checkpoint round trip preserves the checksum") {
  const auto& m = trained_small_lm();
  auto dir = std::filesystem::temp_directory_path() / "taxlab_lm_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "lm.ckpt").string();
  ckpt::save_lm(m, path);
  auto back = ckpt::load_lm(path);
  CHECK(back.checksum() == m.checksum());
  CHECK(back.vocab.words == m.vocab.words);
  CHECK(back.cfg.d_model == m.cfg.d_model);
  CHECK(back.frozen == m.frozen);
}

TEST_CASE("frozen model checksum survives another training run elsewhere") {
  const auto& f = small_world();
  auto m = trained_small_lm().clone();
  m.set_frozen(true);
  const auto before = m.checksum();
  // Train a different model; the frozen one must be untouched.
  lm::LmTrainConfig tc;
  tc.epochs = 1;
  tc.seed = 4;
  lm::train_lm(f.text, f.vocab, f.cfg, tc);
  CHECK(m.checksum() == before);
}
