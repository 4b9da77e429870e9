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
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "taxlab/corpus.hpp"
#include "taxlab/metrics.hpp"
#include "taxlab/ops.hpp"
#include "taxlab/optim.hpp"
#include "taxlab/rng.hpp"
#include "taxlab/taxonomy.hpp"

namespace taxlab::lm {

/// Word-level vocabulary. Category names are single tokens; "yes"/"no" are
/// single tokens with reserved ids so the two-way answer comparison needs no
/// detokenization.
struct Vocab {
  std::vector<std::string> words;
  std::map<std::string, int> ids;
  int pad_id{0}, bos_id{1}, yes_id{2}, no_id{3}, qmark_id{4};

  static Vocab build(const std::vector<std::string>& sentences) {
    Vocab v;
    v.words = {"[pad]", "[bos]", "yes", "no", "?"};
    std::set<std::string> seen(v.words.begin(), v.words.end());
    std::set<std::string> extra;
    for (const auto& s : sentences) {
      std::istringstream is(s);
      std::string w;
      while (is >> w)
        if (!seen.count(w)) extra.insert(w);
    }
    for (const auto& w : extra) v.words.push_back(w);
    for (std::size_t i = 0; i < v.words.size(); ++i) v.ids[v.words[i]] = static_cast<int>(i);
    return v;
  }

  int size() const { return static_cast<int>(words.size()); }

  int id(const std::string& w) const {
    auto it = ids.find(w);
    if (it == ids.end()) throw std::invalid_argument("vocab: unknown word '" + w + "'");
    return it->second;
  }

  std::vector<int> encode(const std::string& sentence) const {
    std::vector<int> out;
    std::istringstream is(sentence);
    std::string w;
    while (is >> w) out.push_back(id(w));
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["words"] = words;
    return j;
  }
  static Vocab from_json(const nlohmann::json& j) {
    Vocab v;
    v.words = j.at("words").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < v.words.size(); ++i) v.ids[v.words[i]] = static_cast<int>(i);
    return v;
  }
};

struct LmConfig {
  int d_model{128};
  int n_heads{4};
  int n_blocks{2};
  int context{64};
  double init_std{0.02};
};

inline void to_json(nlohmann::json& j, const LmConfig& c) {
  j = {{"d_model", c.d_model}, {"n_heads", c.n_heads}, {"n_blocks", c.n_blocks},
       {"context", c.context}, {"init_std", c.init_std}};
}
inline void from_json(const nlohmann::json& j, LmConfig& c) {
  j.at("d_model").get_to(c.d_model);
  j.at("n_heads").get_to(c.n_heads);
  j.at("n_blocks").get_to(c.n_blocks);
  j.at("context").get_to(c.context);
  j.at("init_std").get_to(c.init_std);
}

using FTensor = num::Tensor<float>;

/// Decoder-only transformer: learned token + position embeddings, pre-norm
/// blocks (causal attention, GeLU MLP), final layer norm, linear readout.
/// Copies share parameter storage; use clone() when independent weights are
/// needed.
struct TinyLM {
  LmConfig cfg;
  Vocab vocab;

  struct Block {
    FTensor ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, fc1, fc2;
  };
  FTensor tok_emb;  // [V, d]
  FTensor pos_emb;  // [context, d]
  std::vector<Block> blocks;
  FTensor lnf_g, lnf_b;
  FTensor w_out;  // [d, V]
  bool frozen{false};

  std::vector<FTensor> parameters() const {
    std::vector<FTensor> out{tok_emb, pos_emb};
    for (const auto& b : blocks) {
      out.push_back(b.ln1_g);
      out.push_back(b.ln1_b);
      out.push_back(b.wq);
      out.push_back(b.wk);
      out.push_back(b.wv);
      out.push_back(b.wo);
      out.push_back(b.ln2_g);
      out.push_back(b.ln2_b);
      out.push_back(b.fc1);
      out.push_back(b.fc2);
    }
    out.push_back(lnf_g);
    out.push_back(lnf_b);
    out.push_back(w_out);
    return out;
  }

  void set_frozen(bool value) {
    frozen = value;
    for (auto p : parameters()) p.set_requires_grad(!value);
  }

  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : parameters())
      h = fnv1a(p.values().data(), p.values().size() * sizeof(float), h);
    return h;
  }

  TinyLM clone() const {
    TinyLM out;
    out.cfg = cfg;
    out.vocab = vocab;
    const auto copy = [](const FTensor& t) {
      auto c = FTensor::parameter(t.name(), t.shape(), t.values());
      c.set_requires_grad(t.requires_grad());
      return c;
    };
    out.tok_emb = copy(tok_emb);
    out.pos_emb = copy(pos_emb);
    for (const auto& b : blocks)
      out.blocks.push_back({copy(b.ln1_g), copy(b.ln1_b), copy(b.wq), copy(b.wk), copy(b.wv),
                            copy(b.wo), copy(b.ln2_g), copy(b.ln2_b), copy(b.fc1), copy(b.fc2)});
    out.lnf_g = copy(lnf_g);
    out.lnf_b = copy(lnf_b);
    out.w_out = copy(w_out);
    out.frozen = frozen;
    return out;
  }
};

inline TinyLM init_lm(const LmConfig& cfg, const Vocab& vocab, std::uint64_t seed) {
  if (cfg.d_model % cfg.n_heads != 0)
    throw std::invalid_argument("init_lm: d_model must be divisible by n_heads");
  TinyLM m;
  m.cfg = cfg;
  m.vocab = vocab;
  Rng rng(derive_seed(seed, "lm-init"));
  const auto normal = [&](const std::string& name, std::vector<std::int64_t> shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<float> vals(static_cast<std::size_t>(n));
    for (auto& v : vals) v = static_cast<float>(rng.gaussian() * cfg.init_std);
    return FTensor::parameter(name, std::move(shape), std::move(vals));
  };
  const auto ones = [&](const std::string& name, std::int64_t n) {
    return FTensor::parameter(name, {n}, std::vector<float>(static_cast<std::size_t>(n), 1.f));
  };
  const auto zeros = [&](const std::string& name, std::int64_t n) {
    return FTensor::parameter(name, {n}, std::vector<float>(static_cast<std::size_t>(n), 0.f));
  };
  const std::int64_t d = cfg.d_model, v = vocab.size();
  m.tok_emb = normal("tok_emb", {v, d});
  m.pos_emb = normal("pos_emb", {cfg.context, d});
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = "blocks." + std::to_string(b) + ".";
    m.blocks.push_back({ones(p + "ln1_g", d), zeros(p + "ln1_b", d), normal(p + "wq", {d, d}),
                        normal(p + "wk", {d, d}), normal(p + "wv", {d, d}),
                        normal(p + "wo", {d, d}), ones(p + "ln2_g", d), zeros(p + "ln2_b", d),
                        normal(p + "fc1", {d, 4 * d}), normal(p + "fc2", {4 * d, d})});
  }
  m.lnf_g = ones("lnf_g", d);
  m.lnf_b = zeros("lnf_b", d);
  m.w_out = normal("w_out", {d, v});
  return m;
}

/// Same architecture and shapes, freshly initialized weights, frozen.
inline TinyLM randomize_lm(const TinyLM& tmpl, std::uint64_t seed) {
  TinyLM m = init_lm(tmpl.cfg, tmpl.vocab, derive_seed(seed, "randomize"));
  m.set_frozen(true);
  return m;
}

/// One entry of a forward prefix: either a run of token ids or injected
/// [k, d_model] embedding rows (image tokens).
using PrefixSegment = std::variant<std::vector<int>, FTensor>;

/// Builds the [T, d] input matrix for a prefix, looking up token segments in
/// the embedding table and passing injected rows through untouched.
inline FTensor embed_prefix(const TinyLM& m, const std::vector<PrefixSegment>& segments) {
  std::vector<FTensor> parts;
  for (const auto& seg : segments) {
    if (std::holds_alternative<std::vector<int>>(seg)) {
      const auto& ids = std::get<std::vector<int>>(seg);
      if (ids.empty()) continue;
      parts.push_back(num::embedding_rows(m.tok_emb, ids));
    } else {
      const auto& t = std::get<FTensor>(seg);
      if (t.shape().size() != 2 || t.dim(1) != m.cfg.d_model) {
        throw std::invalid_argument("embed_prefix: injected rows " + shape_str(t.shape()) +
                                    " do not match d_model " + std::to_string(m.cfg.d_model));
      }
      parts.push_back(t);
    }
  }
  if (parts.empty()) throw std::invalid_argument("embed_prefix: empty prefix");
  return parts.size() == 1 ? parts[0] : num::concat_rows(parts);
}

/// Transformer trunk: embedded input rows -> final-layer-normed hidden rows.
inline FTensor forward_hidden(const TinyLM& m, const FTensor& embedded) {
  const std::int64_t t = embedded.dim(0);
  const std::int64_t d = m.cfg.d_model;
  if (t > m.cfg.context)
    throw std::invalid_argument("forward_hidden: sequence length " + std::to_string(t) +
                                " exceeds context " + std::to_string(m.cfg.context));
  auto x = num::add(embedded, num::slice_rows(m.pos_emb, 0, t));
  const std::int64_t hd = d / m.cfg.n_heads;
  for (const auto& b : m.blocks) {
    auto u = num::layer_norm(x, b.ln1_g, b.ln1_b);
    auto q = num::matmul(u, b.wq);
    auto k = num::matmul(u, b.wk);
    auto v = num::matmul(u, b.wv);
    std::vector<FTensor> heads;
    for (int h = 0; h < m.cfg.n_heads; ++h) {
      auto qh = num::slice_cols(q, h * hd, hd);
      auto kh = num::slice_cols(k, h * hd, hd);
      auto vh = num::slice_cols(v, h * hd, hd);
      auto scores = num::scale(num::matmul_nt(qh, kh), 1.0 / std::sqrt(double(hd)));
      heads.push_back(num::matmul(num::causal_softmax_rows(scores), vh));
    }
    auto ctx = num::concat_cols(heads);
    x = num::add(x, num::matmul(ctx, b.wo));
    auto w = num::layer_norm(x, b.ln2_g, b.ln2_b);
    x = num::add(x, num::matmul(num::gelu(num::matmul(w, b.fc1)), b.fc2));
  }
  return num::layer_norm(x, m.lnf_g, m.lnf_b);
}

/// Full-sequence logits [T, V].
inline FTensor logits_all(const TinyLM& m, const FTensor& embedded) {
  return num::matmul(forward_hidden(m, embedded), m.w_out);
}

/// Differentiable [1, V] logits for the token following the prefix.
inline FTensor next_token_logits(const TinyLM& m, const std::vector<PrefixSegment>& segments) {
  auto embedded = embed_prefix(m, segments);
  auto hidden = forward_hidden(m, embedded);
  auto last = num::slice_rows(hidden, embedded.dim(0) - 1, 1);
  return num::matmul(last, m.w_out);
}

/// (logit_yes, logit_no) at the position following the prefix. Pure function
/// of (model, prefix); no graph is recorded.
inline std::pair<float, float> answer_logits(const TinyLM& m,
                                             const std::vector<PrefixSegment>& segments) {
  num::NoGradGuard guard;
  auto row = next_token_logits(m, segments);
  return {row.values()[static_cast<std::size_t>(m.vocab.yes_id)],
          row.values()[static_cast<std::size_t>(m.vocab.no_id)]};
}

struct LmTrainConfig {
  int epochs{30};
  int batch{16};
  double lr{1e-3};
  double weight_decay{0.1};
  double warmup_ratio{0.03};
  double max_grad_norm{1.0};
  double holdout_fraction{0.05};
  bool pack_sequences{false};  // false: one sentence per training sequence
  // Train-time jitter on embedded inputs. Widens the answer basins around
  // each token embedding so injected vectors that land near (not on) an
  // embedding still behave; evaluation always runs clean.
  double embed_noise_std{0.0};
  std::uint64_t seed{0};
};

inline void to_json(nlohmann::json& j, const LmTrainConfig& c) {
  j = {{"epochs", c.epochs},       {"batch", c.batch},
       {"lr", c.lr},               {"weight_decay", c.weight_decay},
       {"warmup_ratio", c.warmup_ratio}, {"max_grad_norm", c.max_grad_norm},
       {"holdout_fraction", c.holdout_fraction}, {"embed_noise_std", c.embed_noise_std},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, LmTrainConfig& c) {
  j.at("epochs").get_to(c.epochs);
  j.at("batch").get_to(c.batch);
  j.at("lr").get_to(c.lr);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("warmup_ratio").get_to(c.warmup_ratio);
  j.at("max_grad_norm").get_to(c.max_grad_norm);
  j.at("holdout_fraction").get_to(c.holdout_fraction);
  if (j.contains("embed_noise_std")) j.at("embed_noise_std").get_to(c.embed_noise_std);
  j.at("seed").get_to(c.seed);
}

struct LmTrainStats {
  double initial_holdout_perplexity{0.0};
  double final_holdout_perplexity{0.0};
  std::vector<double> loss_trace;
};

namespace detail {

/// Packs sentences into sentence-aligned training chunks: a chunk starts at a
/// sentence start (no leading separator, matching bare inference prefixes)
/// and sentences inside a chunk are separated by [bos].
inline std::vector<std::vector<int>> pack_chunks(const std::vector<std::string>& sentences,
                                                 const Vocab& vocab, int context) {
  std::vector<std::vector<int>> chunks;
  std::vector<int> current;
  for (const auto& s : sentences) {
    auto ids = vocab.encode(s);
    if (ids.empty()) continue;
    if (static_cast<int>(ids.size()) > context) ids.resize(static_cast<std::size_t>(context));
    if (!current.empty() &&
        current.size() + 1 + ids.size() > static_cast<std::size_t>(context)) {
      if (current.size() >= 2) chunks.push_back(current);
      current.clear();
    }
    if (!current.empty()) current.push_back(vocab.bos_id);
    current.insert(current.end(), ids.begin(), ids.end());
  }
  if (current.size() >= 2) chunks.push_back(current);
  return chunks;
}

/// One sequence per sentence: the conditional structure inside a sentence is
/// never diluted by packed neighbors, and every sentence starts at position 0
/// exactly like an inference prefix.
inline std::vector<std::vector<int>> sentence_chunks(const std::vector<std::string>& sentences,
                                                     const Vocab& vocab, int context) {
  std::vector<std::vector<int>> chunks;
  for (const auto& s : sentences) {
    auto ids = vocab.encode(s);
    if (static_cast<int>(ids.size()) > context) ids.resize(static_cast<std::size_t>(context));
    if (ids.size() >= 2) chunks.push_back(std::move(ids));
  }
  return chunks;
}

inline double mean_nll(const TinyLM& m, const std::vector<std::vector<int>>& chunks) {
  num::NoGradGuard guard;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& chunk : chunks) {
    std::vector<int> input(chunk.begin(), chunk.end() - 1);
    auto logits = logits_all(m, embed_prefix(m, {input}));
    std::vector<int> positions, targets;
    for (std::size_t i = 0; i + 1 < chunk.size(); ++i) {
      positions.push_back(static_cast<int>(i));
      targets.push_back(chunk[i + 1]);
    }
    auto loss = num::cross_entropy_selected(logits, positions, targets);
    total += static_cast<double>(loss.item()) * static_cast<double>(positions.size());
    count += positions.size();
  }
  return total / static_cast<double>(count);
}

}  // namespace detail

inline double holdout_perplexity(const TinyLM& m, const std::vector<std::vector<int>>& chunks) {
  return std::exp(detail::mean_nll(m, chunks));
}

/// Next-word pretraining over the packed corpus. Sentences are reshuffled and
/// repacked every epoch so questions appear at many positions, including
/// chunk-initial ones that match bare inference prefixes. Deterministic per
/// seed; aborts with the step index on a non-finite loss.
inline TinyLM train_lm(const corpus::Corpus& text, const Vocab& vocab, const LmConfig& cfg,
                       const LmTrainConfig& train, LmTrainStats* stats = nullptr) {
  for (const auto& s : text.sentences) vocab.encode(s);  // unknown words fail fast
  TinyLM m = init_lm(cfg, vocab, train.seed);
  std::vector<std::string> sentences = text.sentences;
  {
    Rng holdout_rng(derive_seed(train.seed, "lm-holdout"));
    holdout_rng.shuffle(sentences);
  }
  const std::size_t holdout_n = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(sentences.size()) * train.holdout_fraction));
  if (sentences.size() < holdout_n + 4)
    throw std::invalid_argument("train_lm: corpus too small, got " +
                                std::to_string(sentences.size()) + " sentences");
  const std::vector<std::string> holdout_sentences(
      sentences.end() - static_cast<std::ptrdiff_t>(holdout_n), sentences.end());
  sentences.resize(sentences.size() - holdout_n);
  const auto chunker = train.pack_sequences ? detail::pack_chunks : detail::sentence_chunks;
  const auto holdout = chunker(holdout_sentences, vocab, cfg.context);

  auto params = m.parameters();
  num::OptimizerState<float> opt;
  opt.lr_base = train.lr;
  opt.weight_decay = train.weight_decay;
  opt.warmup_ratio = train.warmup_ratio;
  opt.max_grad_norm = train.max_grad_norm;
  {
    const auto probe_pack = chunker(sentences, vocab, cfg.context);
    const std::size_t steps_per_epoch =
        (probe_pack.size() + static_cast<std::size_t>(train.batch) - 1) /
        static_cast<std::size_t>(train.batch);
    opt.total_steps = static_cast<std::int64_t>(steps_per_epoch) * train.epochs;
  }

  if (stats) stats->initial_holdout_perplexity = holdout_perplexity(m, holdout);

  Rng order_rng(derive_seed(train.seed, "lm-epoch-order"));
  Rng noise_rng(derive_seed(train.seed, "lm-embed-noise"));
  std::int64_t step = 0;
  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    order_rng.shuffle(sentences);
    const auto chunks = chunker(sentences, vocab, cfg.context);
    for (std::size_t b = 0; b < chunks.size(); b += static_cast<std::size_t>(train.batch)) {
      const std::size_t batch_end =
          std::min(chunks.size(), b + static_cast<std::size_t>(train.batch));
      for (auto& p : params) p.zero_grad();
      std::vector<FTensor> item_losses;
      for (std::size_t i = b; i < batch_end; ++i) {
        const auto& chunk = chunks[i];
        std::vector<int> input(chunk.begin(), chunk.end() - 1);
        auto embedded = embed_prefix(m, {input});
        if (train.embed_noise_std > 0.0) {
          std::vector<float> noise(embedded.values().size());
          for (auto& x : noise)
            x = static_cast<float>(noise_rng.gaussian() * train.embed_noise_std);
          embedded = num::add(embedded, FTensor::from(embedded.shape(), std::move(noise)));
        }
        auto logits = logits_all(m, embedded);
        std::vector<int> positions, targets;
        for (std::size_t p = 0; p + 1 < chunk.size(); ++p) {
          positions.push_back(static_cast<int>(p));
          targets.push_back(chunk[p + 1]);
        }
        item_losses.push_back(num::cross_entropy_selected(logits, positions, targets));
      }
      FTensor batch_loss = item_losses[0];
      for (std::size_t i = 1; i < item_losses.size(); ++i)
        batch_loss = num::add(batch_loss, item_losses[i]);
      batch_loss = num::scale(batch_loss, 1.0 / static_cast<double>(item_losses.size()));
      const double loss_value = batch_loss.item();
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train_lm: non-finite loss at step " + std::to_string(step));
      num::backward(batch_loss);
      num::clip_grad_norm(params, opt.max_grad_norm);
      num::adamw_step(opt, params);
      if (stats) stats->loss_trace.push_back(loss_value);
      ++step;
    }
  }
  if (stats) stats->final_holdout_perplexity = holdout_perplexity(m, holdout);
  return m;
}

/// Text-only hypernymy probe. Question set mirrors the image-level negative
/// sampling scheme: per leaf, `draws_per_leaf` simulated images each
/// contribute one positive and one sampled negative per true hypernym; the
/// distinct (leaf, hypernym) pairs form the probe. Scores group by question
/// hypernym; the baseline row answers with the globally most frequent label.
struct ProbeReport {
  struct Row {
    std::string hypernym;
    double f1{0.0};
    std::size_t yes_n{0}, no_n{0};
  };
  std::vector<Row> per_hypernym;
  double mean_f1{0.0};
  double majority_baseline_f1{0.0};
  std::size_t n_positive{0}, n_negative{0};
};

inline std::vector<int> render_type_question(const Vocab& vocab, const std::string& leaf,
                                             const std::string& hypernym,
                                             const corpus::ArticleRules& articles = {}) {
  const std::string text = "is it true that " + articles.article(leaf) + " " + leaf + " is " +
                           articles.article("type") + " type of " + hypernym + " ?";
  return vocab.encode(text);
}

inline ProbeReport probe_hypernymy(const TinyLM& m, const taxo::Taxonomy& tax,
                                   int draws_per_leaf = 8, std::uint64_t seed = 0,
                                   const corpus::ArticleRules& articles = {}) {
  std::map<std::string, std::set<std::pair<std::string, bool>>> by_hypernym;  // h -> (leaf, yes)
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& [leaf, hyps] : tax.members) {
    Rng rng(derive_seed(seed, "probe:" + leaf));
    const bool has_pool = hyps.size() < tax.hypernyms.size();
    const auto pool = has_pool ? taxo::negative_pool(tax, leaf, taxo::Level::hypernym)
                               : std::vector<std::string>{};
    for (int d = 0; d < draws_per_leaf; ++d) {
      for (const auto& hy : hyps) {
        by_hypernym[hy].insert({leaf, true});
        if (has_pool) by_hypernym[pool[rng.below(pool.size())]].insert({leaf, false});
      }
    }
  }
  ProbeReport report;
  std::vector<double> f1s;
  std::size_t total_yes = 0, total_no = 0;
  for (const auto& [hy, pairs] : by_hypernym)
    for (const auto& [leaf, yes] : pairs) (yes ? total_yes : total_no) += 1;
  const bool majority_yes = total_yes > total_no;
  double baseline_acc = 0.0;
  for (const auto& [hy, pairs] : by_hypernym) {
    std::vector<bool> predicted, actual, baseline;
    for (const auto& [leaf, yes] : pairs) {
      const auto q = render_type_question(m.vocab, leaf, hy, articles);
      const auto [ly, ln] = answer_logits(m, {q});
      predicted.push_back(ly > ln);
      actual.push_back(yes);
      baseline.push_back(majority_yes);
      (yes ? report.n_positive : report.n_negative) += 1;
    }
    ProbeReport::Row row;
    row.hypernym = hy;
    row.f1 = eval::macro_f1(predicted, actual);
    for (bool a : actual) (a ? row.yes_n : row.no_n) += 1;
    report.per_hypernym.push_back(row);
    f1s.push_back(row.f1);
    baseline_acc += eval::macro_f1(baseline, actual);
  }
  report.mean_f1 = 0.0;
  for (double f : f1s) report.mean_f1 += f;
  report.mean_f1 /= static_cast<double>(f1s.size());
  report.majority_baseline_f1 = baseline_acc / static_cast<double>(by_hypernym.size());
  return report;
}

}  // namespace taxlab::lm
