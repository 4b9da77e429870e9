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

#include <cmath>
#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <vector>

#include "taxlab/tensor.hpp"

namespace taxlab::num {

/// AdamW with decoupled weight decay plus the warmup/cosine schedule.
/// Betas/epsilon are recorded assumptions (0.9 / 0.999 / 1e-8); they end up
/// in the run manifest alongside everything else.
template <typename T>
struct OptimizerState {
  struct Moments {
    std::vector<T> m, v;
  };
  std::vector<Moments> moments;  // one slot per parameter, allocated on first step
  std::int64_t step_count{0};
  double lr_base{2e-5};
  double weight_decay{0.1};
  double warmup_ratio{0.03};
  std::int64_t total_steps{0};
  double max_grad_norm{1.0};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
};

/// Linear warmup from 0 over the first ceil(warmup_ratio * total) steps, then
/// cosine decay reaching exactly 0 at total_steps. Continuous at the
/// boundary, non-negative everywhere; steps beyond the end clamp to 0 with a
/// warning.
template <typename T>
inline double lr_at(std::int64_t step, const OptimizerState<T>& state) {
  if (step < 0) throw std::invalid_argument("lr_at: negative step");
  const std::int64_t total = state.total_steps;
  if (step > total) {
    std::cerr << "[taxlab] warning: lr_at step " << step << " beyond total " << total
              << ", clamping to final value\n";
    step = total;
  }
  const std::int64_t warmup =
      static_cast<std::int64_t>(std::ceil(state.warmup_ratio * static_cast<double>(total)));
  if (warmup > 0 && step <= warmup) {
    return state.lr_base * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total == warmup) return state.lr_base;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return state.lr_base * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

/// Scales all gradients so their global L2 norm (over the flattened
/// concatenation) is at most max_norm. Returns the scale that was applied.
template <typename T>
inline double clip_grad_norm(std::vector<Tensor<T>>& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (const T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double s = max_norm / norm;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (T& g : p.grad()) g = static_cast<T>(static_cast<double>(g) * s);
  }
  return s;
}

/// One decoupled-weight-decay Adam step with bias correction. Parameters
/// without a gradient buffer (frozen, or unreached by backward) are left
/// untouched. Aborts on non-finite gradients, naming the parameter.
template <typename T>
inline void adamw_step(OptimizerState<T>& state, std::vector<Tensor<T>>& params) {
  if (state.moments.empty()) {
    state.moments.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.moments[i].m.assign(params[i].values().size(), T{0});
      state.moments[i].v.assign(params[i].values().size(), T{0});
    }
  }
  if (state.moments.size() != params.size()) {
    throw std::invalid_argument("adamw_step: optimizer state built for " +
                                std::to_string(state.moments.size()) + " parameters, got " +
                                std::to_string(params.size()));
  }
  state.step_count += 1;
  const double lr = lr_at(std::min(state.step_count, state.total_steps), state);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.has_grad()) continue;
    if (p.values().size() != state.moments[i].m.size()) {
      throw std::invalid_argument("adamw_step: moment shape mismatch for parameter '" +
                                  p.name() + "'");
    }
    auto& m = state.moments[i].m;
    auto& v = state.moments[i].v;
    auto& vals = p.values();
    const auto& grads = p.grad();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double g = static_cast<double>(grads[j]);
      if (!std::isfinite(g)) {
        throw std::runtime_error("adamw_step: non-finite gradient in parameter '" +
                                 (p.name().empty() ? std::string("<unnamed>") : p.name()) +
                                 "' at index " + std::to_string(j));
      }
      const double mj = state.beta1 * static_cast<double>(m[j]) + (1.0 - state.beta1) * g;
      const double vj = state.beta2 * static_cast<double>(v[j]) + (1.0 - state.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      const double update = mhat / (std::sqrt(vhat) + state.epsilon) +
                            state.weight_decay * static_cast<double>(vals[j]);
      vals[j] = static_cast<T>(static_cast<double>(vals[j]) - lr * update);
    }
  }
}

}  // namespace taxlab::num
