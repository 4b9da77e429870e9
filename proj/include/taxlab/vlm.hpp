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
#include <string>
#include <vector>

#include <json.hpp>

#include "taxlab/checkpoint.hpp"
#include "taxlab/lm.hpp"
#include "taxlab/stimuli.hpp"
#include "taxlab/world.hpp"

namespace taxlab::vlm {

using lm::FTensor;

/// Two affine layers with GeLU between them; hidden width equals the output
/// width (the LM embedding dimension). The only trainable component in any
/// grounded run.
struct Projector {
  int d_in{0};
  int d_model{0};
  FTensor w1, b1, w2, b2;

  std::vector<FTensor> parameters() const { return {w1, b1, w2, b2}; }

  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : parameters())
      h = fnv1a(p.values().data(), p.values().size() * sizeof(float), h);
    return h;
  }

  Projector clone() const {
    Projector out;
    out.d_in = d_in;
    out.d_model = d_model;
    const auto copy = [](const FTensor& t) {
      auto c = FTensor::parameter(t.name(), t.shape(), t.values());
      c.set_requires_grad(t.requires_grad());
      return c;
    };
    out.w1 = copy(w1);
    out.b1 = copy(b1);
    out.w2 = copy(w2);
    out.b2 = copy(b2);
    return out;
  }
};

inline Projector init_projector(int d_in, int d_model, double init_std, std::uint64_t seed) {
  Projector p;
  p.d_in = d_in;
  p.d_model = d_model;
  Rng rng(derive_seed(seed, "projector-init"));
  const auto normal = [&](const std::string& name, std::vector<std::int64_t> shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<float> vals(static_cast<std::size_t>(n));
    for (auto& v : vals) v = static_cast<float>(rng.gaussian() * init_std);
    return FTensor::parameter(name, std::move(shape), std::move(vals));
  };
  p.w1 = normal("projector.w1", {d_in, d_model});
  p.b1 = FTensor::parameter("projector.b1", {d_model},
                            std::vector<float>(static_cast<std::size_t>(d_model), 0.f));
  p.w2 = normal("projector.w2", {d_model, d_model});
  p.b2 = FTensor::parameter("projector.b2", {d_model},
                            std::vector<float>(static_cast<std::size_t>(d_model), 0.f));
  return p;
}

/// [N, d_in] image features -> [N, d_model] image tokens.
inline FTensor project(const Projector& p, const FTensor& features) {
  if (features.shape().size() != 2 || features.dim(1) != p.d_in) {
    throw std::invalid_argument("project: features " + shape_str(features.shape()) +
                                " do not match projector input dim " + std::to_string(p.d_in));
  }
  auto hidden = num::gelu(num::add(num::matmul(features, p.w1), p.b1));
  return num::add(num::matmul(hidden, p.w2), p.b2);
}

/// Training knobs. Defaults are the reference recipe (epochs 5, batch 16,
/// lr 2e-5, weight decay 0.1, warmup 0.03, clip 1.0); presets override lr and
/// epochs for desk-scale runs.
struct TrainConfig {
  int epochs{5};
  int batch{16};
  double lr{2e-5};
  double weight_decay{0.1};
  double warmup_ratio{0.03};
  double max_grad_norm{1.0};
  double init_std{0.02};
  std::uint64_t seed{0};
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch", c.batch},
       {"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"warmup_ratio", c.warmup_ratio},
       {"max_grad_norm", c.max_grad_norm},
       {"init_std", c.init_std},
       {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("epochs").get_to(c.epochs);
  j.at("batch").get_to(c.batch);
  j.at("lr").get_to(c.lr);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("warmup_ratio").get_to(c.warmup_ratio);
  j.at("max_grad_norm").get_to(c.max_grad_norm);
  j.at("init_std").get_to(c.init_std);
  j.at("seed").get_to(c.seed);
}

struct TrainResult {
  Projector projector;
  std::vector<double> loss_trace;        // one entry per optimizer step
  std::vector<double> epoch_mean_loss;   // one entry per epoch
  std::size_t train_items{0};
  std::uint64_t lm_checksum{0};
  std::uint64_t world_checksum{0};
};

namespace detail {

inline std::map<std::string, const world::ImageFeature*> image_index(
    const world::FeatureWorld& w) {
  std::map<std::string, const world::ImageFeature*> idx;
  for (const auto& [_, imgs] : w.by_leaf)
    for (const auto& im : imgs) idx[im.image_id] = &im;
  return idx;
}

inline FTensor feature_tensor(const world::ImageFeature& im) {
  return FTensor::from({1, static_cast<std::int64_t>(im.vec.size())}, im.vec);
}

}  // namespace detail

/// Minimizes -log p(answer | image tokens ++ question) with the loss taken
/// only at the answer position. Image encoder features and the LM stay
/// frozen; their checksums are verified before the result is returned.
inline TrainResult train_projector(const std::vector<stim::Stimulus>& stimuli,
                                   const world::FeatureWorld& w, const lm::TinyLM& frozen_lm,
                                   const TrainConfig& cfg,
                                   const corpus::ArticleRules& articles = {}) {
  if (!frozen_lm.frozen)
    throw std::invalid_argument("train_projector: LM is not frozen; refusing to start");
  const std::uint64_t lm_before = frozen_lm.checksum();
  const std::uint64_t world_before = w.checksum();

  std::vector<const stim::Stimulus*> train_items;
  for (const auto& s : stimuli)
    if (s.split == world::Split::train) train_items.push_back(&s);
  if (train_items.empty()) throw std::invalid_argument("train_projector: no train stimuli");

  const auto index = detail::image_index(w);
  for (const auto* s : train_items)
    if (!index.count(s->image_id))
      throw std::invalid_argument("train_projector: stimulus image '" + s->image_id +
                                  "' not present in world");

  TrainResult result;
  result.train_items = train_items.size();
  Projector proj = init_projector(w.dim, frozen_lm.cfg.d_model, cfg.init_std, cfg.seed);
  auto params = proj.parameters();
  num::OptimizerState<float> opt;
  opt.lr_base = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  opt.warmup_ratio = cfg.warmup_ratio;
  opt.max_grad_norm = cfg.max_grad_norm;
  const std::size_t steps_per_epoch =
      (train_items.size() + static_cast<std::size_t>(cfg.batch) - 1) /
      static_cast<std::size_t>(cfg.batch);
  opt.total_steps = static_cast<std::int64_t>(steps_per_epoch) * cfg.epochs;

  Rng order_rng(derive_seed(cfg.seed, "projector-epoch-order"));
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t batch_end =
          std::min(order.size(), b + static_cast<std::size_t>(cfg.batch));
      for (auto& p : params) p.zero_grad();
      std::vector<FTensor> item_losses;
      for (std::size_t i = b; i < batch_end; ++i) {
        const auto& s = *train_items[order[i]];
        auto tokens = project(proj, detail::feature_tensor(*index.at(s.image_id)));
        auto question = stim::render_question(s.question_category, frozen_lm.vocab, articles);
        auto logits = lm::next_token_logits(frozen_lm, {tokens, question});
        const int answer = s.expect_yes ? frozen_lm.vocab.yes_id : frozen_lm.vocab.no_id;
        item_losses.push_back(num::cross_entropy_selected(logits, {0}, {answer}));
      }
      FTensor batch_loss = item_losses[0];
      for (std::size_t i = 1; i < item_losses.size(); ++i)
        batch_loss = num::add(batch_loss, item_losses[i]);
      batch_loss = num::scale(batch_loss, 1.0 / static_cast<double>(item_losses.size()));
      const double loss_value = batch_loss.item();
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train_projector: non-finite loss at step " +
                                 std::to_string(step));
      num::backward(batch_loss);
      num::clip_grad_norm(params, opt.max_grad_norm);
      num::adamw_step(opt, params);
      result.loss_trace.push_back(loss_value);
      epoch_loss += loss_value;
      ++epoch_batches;
      ++step;
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(epoch_batches));
  }

  if (frozen_lm.checksum() != lm_before)
    throw std::logic_error("train_projector: frozen LM checksum changed during training");
  if (w.checksum() != world_before)
    throw std::logic_error("train_projector: world checksum changed during training");
  result.lm_checksum = lm_before;
  result.world_checksum = world_before;
  result.projector = proj;
  return result;
}

struct Prediction {
  bool yes{false};
  float logit_yes{0.f};
  float logit_no{0.f};
};

/// Deterministic two-way answer; exact ties go to "no".
inline Prediction predict(const Projector& proj, const lm::TinyLM& m,
                          const world::ImageFeature& image, const std::vector<int>& question) {
  num::NoGradGuard guard;
  auto tokens = project(proj, detail::feature_tensor(image));
  const auto [ly, ln] = lm::answer_logits(m, {tokens, question});
  return {ly > ln, ly, ln};
}

inline void save_projector(const Projector& p, const std::string& path) {
  ckpt::save_tensors(path, p.parameters());
  nlohmann::json side;
  side["kind"] = "projector";
  side["d_in"] = p.d_in;
  side["d_model"] = p.d_model;
  write_text_file(path + ".json", side.dump(2) + "\n");
}

inline Projector load_projector(const std::string& path) {
  nlohmann::json side = nlohmann::json::parse(read_text_file(path + ".json"));
  if (side.at("kind").get<std::string>() != "projector")
    throw std::runtime_error("checkpoint: " + path + " is not a projector checkpoint");
  auto tensors = ckpt::load_tensors(path);
  Projector p;
  p.d_in = side.at("d_in").get<int>();
  p.d_model = side.at("d_model").get<int>();
  p.w1 = tensors.at("projector.w1");
  p.b1 = tensors.at("projector.b1");
  p.w2 = tensors.at("projector.w2");
  p.b2 = tensors.at("projector.b2");
  return p;
}

}  // namespace taxlab::vlm
