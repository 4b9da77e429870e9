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

#include <cmath>
#include <vector>

#include "taxlab/optim.hpp"
#include "taxlab/rng.hpp"

using taxlab::Rng;
using taxlab::num::adamw_step;
using taxlab::num::clip_grad_norm;
using taxlab::num::lr_at;
using taxlab::num::OptimizerState;
using taxlab::num::Tensor;

namespace {

// Scalar reference for one decoupled-weight-decay Adam step, independent of
// the tensor implementation. Mirrors: m/v update, bias correction,
// p -= lr * (mhat / (sqrt(vhat) + eps) + wd * p).
double adamw_reference(double p, double g, double lr, double wd, double b1, double b2,
                       double eps, int steps) {
  double m = 0.0, v = 0.0;
  for (int t = 1; t <= steps; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    p -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p);
  }
  return p;
}

OptimizerState<double> flat_schedule_state(double lr) {
  OptimizerState<double> st;
  st.lr_base = lr;
  st.total_steps = 1;
  st.warmup_ratio = 1.0;  // lr_at(1) == lr_base, so a single step sees lr exactly
  return st;
}

}  // namespace

TEST_CASE("adamw single step matches the scalar reference") {
  auto p = Tensor<double>::parameter("p", {2, 2}, {0.5, 0.5, 0.5, 0.5});
  p.grad().assign(4, 1.0);
  auto st = flat_schedule_state(2e-5);
  std::vector<Tensor<double>> params{p};
  adamw_step(st, params);
  const double expected = adamw_reference(0.5, 1.0, 2e-5, 0.1, 0.9, 0.999, 1e-8, 1);
  for (double v : p.values()) CHECK_THAT(v, Catch::Matchers::WithinAbs(expected, 1e-12));
  CHECK(st.step_count == 1);
}

TEST_CASE("zero gradient and zero weight decay leave parameters unchanged") {
  auto p = Tensor<double>::parameter("p", {3}, {1.0, -2.0, 3.0});
  p.grad().assign(3, 0.0);
  auto st = flat_schedule_state(2e-5);
  st.weight_decay = 0.0;
  std::vector<Tensor<double>> params{p};
  adamw_step(st, params);
  CHECK(p.values() == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  auto p = Tensor<double>::parameter("p", {3}, {1.0, -2.0, 3.0});
  p.grad().assign(3, 0.7);
  auto st = flat_schedule_state(0.0);
  std::vector<Tensor<double>> params{p};
  adamw_step(st, params);
  CHECK(p.values() == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("non-finite gradient aborts naming the parameter") {
  auto p = Tensor<double>::parameter("blocks.0.wq", {2}, {1.0, 2.0});
  p.grad() = {1.0, std::nan("")};
  auto st = flat_schedule_state(1e-3);
  std::vector<Tensor<double>> params{p};
  CHECK_THROWS_WITH(adamw_step(st, params),
                    Catch::Matchers::ContainsSubstring("blocks.0.wq"));
}

TEST_CASE("lr schedule endpoints and warmup peak") {
  OptimizerState<double> st;
  st.lr_base = 2e-5;
  st.warmup_ratio = 0.03;
  st.total_steps = 1000;
  const auto warmup = static_cast<std::int64_t>(std::ceil(0.03 * 1000));
  CHECK(lr_at(0, st) == 0.0);
  CHECK_THAT(lr_at(warmup, st), Catch::Matchers::WithinRel(2e-5, 1e-12));
  CHECK_THAT(lr_at(st.total_steps, st), Catch::Matchers::WithinAbs(0.0, 1e-20));
}

TEST_CASE("lr schedule is continuous at the boundary and non-negative") {
  OptimizerState<double> st;
  st.lr_base = 1e-3;
  st.warmup_ratio = 0.1;
  st.total_steps = 200;
  const std::int64_t warmup = 20;
  CHECK_THAT(lr_at(warmup, st), Catch::Matchers::WithinRel(st.lr_base, 1e-12));
  CHECK_THAT(lr_at(warmup + 1, st) - lr_at(warmup, st),
             Catch::Matchers::WithinAbs(0.0, st.lr_base * 0.05));
  double prev = lr_at(0, st);
  for (std::int64_t s = 0; s <= st.total_steps; ++s) {
    const double lr = lr_at(s, st);
    CHECK(lr >= 0.0);
    if (s > warmup) CHECK(lr <= prev + 1e-18);
    prev = lr;
  }
}

TEST_CASE("lr beyond total clamps to the final value") {
  OptimizerState<double> st;
  st.lr_base = 1e-3;
  st.warmup_ratio = 0.1;
  st.total_steps = 100;
  CHECK(lr_at(150, st) == lr_at(100, st));
}

TEST_CASE("clip scales an over-norm gradient set") {
  auto a = Tensor<float>::parameter("a", {2}, {0.f, 0.f});
  auto b = Tensor<float>::parameter("b", {2}, {0.f, 0.f});
  a.grad() = {1.2f, 0.9f};  // norm(1.2,0.9,0.8,0.6) = sqrt(1.44+.81+.64+.36)=sqrt(3.25)
  b.grad() = {0.8f, 0.6f};
  std::vector<Tensor<float>> params{a, b};
  SECTION("norm 2 halves everything") {
    a.grad() = {2.0f, 0.0f};
    b.grad() = {0.0f, 0.0f};
    const double s = clip_grad_norm(params, 1.0);
    CHECK_THAT(s, Catch::Matchers::WithinRel(0.5, 1e-6));
    CHECK_THAT(a.grad()[0], Catch::Matchers::WithinRel(1.0f, 1e-6f));
  }
  SECTION("below threshold unchanged") {
    a.grad() = {0.3f, 0.0f};
    b.grad() = {0.0f, 0.4f};
    CHECK(clip_grad_norm(params, 1.0) == 1.0);
    CHECK(a.grad()[0] == 0.3f);
    CHECK(b.grad()[1] == 0.4f);
  }
  SECTION("mixed shapes use the flat concatenated norm") {
    // Oracle: flatten and take the plain vector norm.
    double sq = 0.0;
    for (float g : a.grad()) sq += double(g) * g;
    for (float g : b.grad()) sq += double(g) * g;
    const double flat_norm = std::sqrt(sq);
    const double s = clip_grad_norm(params, 1.0);
    CHECK_THAT(s, Catch::Matchers::WithinRel(1.0 / flat_norm, 1e-6));
  }
}

TEST_CASE("clip is idempotent") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = Tensor<float>::parameter("a", {5}, std::vector<float>(5, 0.f));
    auto b = Tensor<float>::parameter("b", {3}, std::vector<float>(3, 0.f));
    a.grad().resize(5);
    b.grad().resize(3);
    for (auto& g : a.grad()) g = static_cast<float>(rng.gaussian() * 2.0);
    for (auto& g : b.grad()) g = static_cast<float>(rng.gaussian() * 2.0);
    std::vector<Tensor<float>> params{a, b};
    clip_grad_norm(params, 1.0);
    auto a1 = a.grad();
    auto b1 = b.grad();
    clip_grad_norm(params, 1.0);
    for (std::size_t i = 0; i < a1.size(); ++i)
      CHECK_THAT(a.grad()[i], Catch::Matchers::WithinRel(a1[i], 1e-5f));
    for (std::size_t i = 0; i < b1.size(); ++i)
      CHECK_THAT(b.grad()[i], Catch::Matchers::WithinRel(b1[i], 1e-5f));
  }
}

TEST_CASE("frozen parameters are bit-identical across optimizer steps") {
  auto frozen = Tensor<float>::parameter("frozen", {4}, {1.f, 2.f, 3.f, 4.f});
  frozen.set_requires_grad(false);
  auto live = Tensor<float>::parameter("live", {4}, {1.f, 1.f, 1.f, 1.f});
  const auto before = frozen.checksum();
  OptimizerState<float> st;
  st.lr_base = 1e-2;
  st.warmup_ratio = 0.0;
  st.total_steps = 100;
  std::vector<Tensor<float>> params{frozen, live};
  for (int s = 0; s < 50; ++s) {
    live.zero_grad();
    live.grad().assign(4, 0.5f);
    adamw_step(st, params);
  }
  CHECK(frozen.checksum() == before);
  CHECK(live.values()[0] != 1.f);
}
