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
#include <vector>

#include "taxlab/tensor.hpp"

// Forward ops with recorded reverse-mode closures. Convention throughout:
// within-op reductions (dot products, row sums, normalization statistics)
// accumulate in double; gradient accumulation across consumers is += in T.

namespace taxlab::num {

namespace detail {

template <typename T>
inline bool record(const Tensor<T>& a) {
  return grad_enabled_flag() && a.node()->tracked();
}

template <typename T>
inline void check_2d(const Tensor<T>& t, const char* op) {
  if (t.shape().size() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected 2-d tensor, got " +
                                shape_str(t.shape()));
  }
}

}  // namespace detail

/// C = A(m,k) * B(k,n)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_2d(a, "matmul");
  detail::check_2d(b, "matmul");
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw std::invalid_argument("matmul: lhs " + shape_str(a.shape()) +
                                " incompatible with rhs " + shape_str(b.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({m, n});
  {
    const T* A = a.values().data();
    const T* B = b.values().data();
    T* C = out.values().data();
    std::vector<double> acc(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < m; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::int64_t kk = 0; kk < k; ++kk) {
        const double av = static_cast<double>(A[i * k + kk]);
        const T* Brow = B + kk * n;
        for (std::int64_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(Brow[j]);
      }
      for (std::int64_t j = 0; j < n; ++j) C[i * n + j] = static_cast<T>(acc[j]);
    }
  }
  if (detail::record(a) || detail::record(b)) {
    auto node = out.node();
    node->parents = {a.node(), b.node()};
    node->backward_op = [m, k, n](TensorNode<T>& self) {
      auto& A = *self.parents[0];
      auto& B = *self.parents[1];
      const T* G = self.grad.data();
      if (A.tracked()) {
        A.ensure_grad();
        for (std::int64_t i = 0; i < m; ++i) {
          for (std::int64_t kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            const T* Grow = G + i * n;
            const T* Brow = B.values.data() + kk * n;
            for (std::int64_t j = 0; j < n; ++j)
              acc += static_cast<double>(Grow[j]) * static_cast<double>(Brow[j]);
            A.grad[i * k + kk] += static_cast<T>(acc);
          }
        }
      }
      if (B.tracked()) {
        B.ensure_grad();
        std::vector<double> acc(static_cast<std::size_t>(n));
        for (std::int64_t kk = 0; kk < k; ++kk) {
          std::fill(acc.begin(), acc.end(), 0.0);
          for (std::int64_t i = 0; i < m; ++i) {
            const double av = static_cast<double>(A.values[i * k + kk]);
            const T* Grow = G + i * n;
            for (std::int64_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(Grow[j]);
          }
          for (std::int64_t j = 0; j < n; ++j) B.grad[kk * n + j] += static_cast<T>(acc[j]);
        }
      }
    };
  }
  return out;
}

/// C = A(m,k) * B(n,k)^T  -> (m,n). Both operands are read row-contiguously.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_2d(a, "matmul_nt");
  detail::check_2d(b, "matmul_nt");
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw std::invalid_argument("matmul_nt: lhs " + shape_str(a.shape()) +
                                " incompatible with rhs " + shape_str(b.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({m, n});
  {
    const T* A = a.values().data();
    const T* B = b.values().data();
    T* C = out.values().data();
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        const T* Arow = A + i * k;
        const T* Brow = B + j * k;
        for (std::int64_t kk = 0; kk < k; ++kk)
          acc += static_cast<double>(Arow[kk]) * static_cast<double>(Brow[kk]);
        C[i * n + j] = static_cast<T>(acc);
      }
    }
  }
  if (detail::record(a) || detail::record(b)) {
    auto node = out.node();
    node->parents = {a.node(), b.node()};
    node->backward_op = [m, k, n](TensorNode<T>& self) {
      auto& A = *self.parents[0];
      auto& B = *self.parents[1];
      const T* G = self.grad.data();
      if (A.tracked()) {
        A.ensure_grad();
        std::vector<double> acc(static_cast<std::size_t>(k));
        for (std::int64_t i = 0; i < m; ++i) {
          std::fill(acc.begin(), acc.end(), 0.0);
          for (std::int64_t j = 0; j < n; ++j) {
            const double gv = static_cast<double>(G[i * n + j]);
            const T* Brow = B.values.data() + j * k;
            for (std::int64_t kk = 0; kk < k; ++kk) acc[kk] += gv * static_cast<double>(Brow[kk]);
          }
          for (std::int64_t kk = 0; kk < k; ++kk) A.grad[i * k + kk] += static_cast<T>(acc[kk]);
        }
      }
      if (B.tracked()) {
        B.ensure_grad();
        std::vector<double> acc(static_cast<std::size_t>(k));
        for (std::int64_t j = 0; j < n; ++j) {
          std::fill(acc.begin(), acc.end(), 0.0);
          for (std::int64_t i = 0; i < m; ++i) {
            const double gv = static_cast<double>(G[i * n + j]);
            const T* Arow = A.values.data() + i * k;
            for (std::int64_t kk = 0; kk < k; ++kk) acc[kk] += gv * static_cast<double>(Arow[kk]);
          }
          for (std::int64_t kk = 0; kk < k; ++kk) B.grad[j * k + kk] += static_cast<T>(acc[kk]);
        }
      }
    };
  }
  return out;
}

/// Elementwise a + b; b may also be a vector broadcast over the rows of a
/// 2-d a (bias add), or a scalar broadcast over everything.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const bool same = a.shape() == b.shape();
  const bool row_bcast = a.shape().size() == 2 && b.shape().size() == 1 &&
                         b.dim(0) == a.dim(1);
  const bool scalar_bcast = b.size() == 1 && !same;
  if (!same && !row_bcast && !scalar_bcast) {
    throw std::invalid_argument("add: shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()) + " do not broadcast");
  }
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::int64_t total = a.size();
  const std::int64_t bn = b.size();
  for (std::int64_t i = 0; i < total; ++i) {
    const T bv = same ? b.values()[i] : (scalar_bcast ? b.values()[0] : b.values()[i % bn]);
    out.values()[i] = a.values()[i] + bv;
  }
  if (detail::record(a) || detail::record(b)) {
    auto node = out.node();
    node->parents = {a.node(), b.node()};
    node->backward_op = [same, scalar_bcast, total, bn](TensorNode<T>& self) {
      auto& A = *self.parents[0];
      auto& B = *self.parents[1];
      if (A.tracked()) {
        A.ensure_grad();
        for (std::int64_t i = 0; i < total; ++i) A.grad[i] += self.grad[i];
      }
      if (B.tracked()) {
        B.ensure_grad();
        if (same) {
          for (std::int64_t i = 0; i < total; ++i) B.grad[i] += self.grad[i];
        } else if (scalar_bcast) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < total; ++i) acc += static_cast<double>(self.grad[i]);
          B.grad[0] += static_cast<T>(acc);
        } else {
          std::vector<double> acc(static_cast<std::size_t>(bn), 0.0);
          for (std::int64_t i = 0; i < total; ++i) acc[i % bn] += static_cast<double>(self.grad[i]);
          for (std::int64_t j = 0; j < bn; ++j) B.grad[j] += static_cast<T>(acc[j]);
        }
      }
    };
  }
  return out;
}

/// Elementwise product, same shapes only.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("mul: shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()) + " differ");
  }
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i)
    out.values()[i] = a.values()[i] * b.values()[i];
  if (detail::record(a) || detail::record(b)) {
    auto node = out.node();
    node->parents = {a.node(), b.node()};
    node->backward_op = [](TensorNode<T>& self) {
      auto& A = *self.parents[0];
      auto& B = *self.parents[1];
      const std::size_t n = self.grad.size();
      if (A.tracked()) {
        A.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) A.grad[i] += self.grad[i] * B.values[i];
      }
      if (B.tracked()) {
        B.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) B.grad[i] += self.grad[i] * A.values[i];
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, double c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i)
    out.values()[i] = static_cast<T>(static_cast<double>(a.values()[i]) * c);
  if (detail::record(a)) {
    auto node = out.node();
    node->parents = {a.node()};
    node->backward_op = [c](TensorNode<T>& self) {
      auto& A = *self.parents[0];
      if (!A.tracked()) return;
      A.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        A.grad[i] += static_cast<T>(static_cast<double>(self.grad[i]) * c);
    };
  }
  return out;
}

/// Exact GeLU: x * Phi(x) with Phi the standard normal CDF (erf form, not the
/// tanh approximation).
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a.values()[i]);
    out.values()[i] = static_cast<T>(x * 0.5 * (1.0 + std::erf(x * inv_sqrt2)));
  }
  if (detail::record(a)) {
    auto node = out.node();
    node->parents = {a.node()};
    node->backward_op = [](TensorNode<T>& self) {
      auto& A = *self.parents[0];
      if (!A.tracked()) return;
      A.ensure_grad();
      constexpr double inv_sqrt2 = 0.7071067811865475244;
      constexpr double inv_sqrt2pi = 0.3989422804014326779;
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double x = static_cast<double>(A.values[i]);
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        A.grad[i] += static_cast<T>(static_cast<double>(self.grad[i]) * (cdf + x * pdf));
      }
    };
  }
  return out;
}

/// Layer normalization over the last axis with learned gain/bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     double eps = 1e-5) {
  const std::int64_t n = x.shape().back();
  if (gain.shape() != std::vector<std::int64_t>{n} || bias.shape() != std::vector<std::int64_t>{n}) {
    throw std::invalid_argument("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                                shape_str(bias.shape()) + " do not match last dim of " +
                                shape_str(x.shape()));
  }
  const std::int64_t rows = x.size() / n;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  std::vector<double> inv_std(static_cast<std::size_t>(rows));
  std::vector<double> means(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = x.values().data() + r * n;
    double mean = 0.0;
    for (std::int64_t j = 0; j < n; ++j) mean += static_cast<double>(xr[j]);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      const double d = static_cast<double>(xr[j]) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    means[r] = mean;
    inv_std[r] = is;
    T* yr = out.values().data() + r * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double xhat = (static_cast<double>(xr[j]) - mean) * is;
      yr[j] = static_cast<T>(xhat * static_cast<double>(gain.values()[j]) +
                             static_cast<double>(bias.values()[j]));
    }
  }
  if (detail::record(x) || detail::record(gain) || detail::record(bias)) {
    auto node = out.node();
    node->parents = {x.node(), gain.node(), bias.node()};
    node->backward_op = [rows, n, means, inv_std](TensorNode<T>& self) {
      auto& X = *self.parents[0];
      auto& Gn = *self.parents[1];
      auto& Bs = *self.parents[2];
      if (X.tracked()) X.ensure_grad();
      if (Gn.tracked()) Gn.ensure_grad();
      if (Bs.tracked()) Bs.ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        const T* xr = X.values.data() + r * n;
        const T* gr = self.grad.data() + r * n;
        const double mean = means[r], is = inv_std[r];
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
          const double xhat = (static_cast<double>(xr[j]) - mean) * is;
          const double dxhat = static_cast<double>(gr[j]) * static_cast<double>(Gn.values[j]);
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          if (Gn.tracked()) Gn.grad[j] += static_cast<T>(static_cast<double>(gr[j]) * xhat);
          if (Bs.tracked()) Bs.grad[j] += gr[j];
        }
        if (X.tracked()) {
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::int64_t j = 0; j < n; ++j) {
            const double xhat = (static_cast<double>(xr[j]) - mean) * is;
            const double dxhat = static_cast<double>(gr[j]) * static_cast<double>(Gn.values[j]);
            X.grad[r * n + j] += static_cast<T>(
                is * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat));
          }
        }
      }
    };
  }
  return out;
}

namespace detail {

template <typename T>
inline void softmax_row(const T* x, T* y, std::int64_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::int64_t j = 0; j < n; ++j) mx = std::max(mx, static_cast<double>(x[j]));
  double sum = 0.0;
  for (std::int64_t j = 0; j < n; ++j) {
    const double e = std::exp(static_cast<double>(x[j]) - mx);
    y[j] = static_cast<T>(e);
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (std::int64_t j = 0; j < n; ++j) y[j] = static_cast<T>(static_cast<double>(y[j]) * inv);
}

template <typename T>
inline void softmax_row_backward(const T* y, const T* g, T* dx, std::int64_t n) {
  double dot = 0.0;
  for (std::int64_t j = 0; j < n; ++j)
    dot += static_cast<double>(g[j]) * static_cast<double>(y[j]);
  for (std::int64_t j = 0; j < n; ++j)
    dx[j] += static_cast<T>(static_cast<double>(y[j]) * (static_cast<double>(g[j]) - dot));
}

}  // namespace detail

/// Row-wise softmax of a 2-d tensor.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  detail::check_2d(x, "softmax_rows");
  const std::int64_t m = x.dim(0), n = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (std::int64_t r = 0; r < m; ++r)
    detail::softmax_row(x.values().data() + r * n, out.values().data() + r * n, n);
  if (detail::record(x)) {
    auto node = out.node();
    node->parents = {x.node()};
    node->backward_op = [m, n](TensorNode<T>& self) {
      auto& X = *self.parents[0];
      if (!X.tracked()) return;
      X.ensure_grad();
      for (std::int64_t r = 0; r < m; ++r)
        detail::softmax_row_backward(self.values.data() + r * n, self.grad.data() + r * n,
                                     X.grad.data() + r * n, n);
    };
  }
  return out;
}

/// Softmax over a square attention-score matrix where row i may only attend
/// to columns 0..i; masked columns come out exactly zero.
template <typename T>
Tensor<T> causal_softmax_rows(const Tensor<T>& x) {
  detail::check_2d(x, "causal_softmax_rows");
  const std::int64_t m = x.dim(0);
  if (x.dim(1) != m) {
    throw std::invalid_argument("causal_softmax_rows: expected square scores, got " +
                                shape_str(x.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (std::int64_t r = 0; r < m; ++r)
    detail::softmax_row(x.values().data() + r * m, out.values().data() + r * m, r + 1);
  if (detail::record(x)) {
    auto node = out.node();
    node->parents = {x.node()};
    node->backward_op = [m](TensorNode<T>& self) {
      auto& X = *self.parents[0];
      if (!X.tracked()) return;
      X.ensure_grad();
      for (std::int64_t r = 0; r < m; ++r)
        detail::softmax_row_backward(self.values.data() + r * m, self.grad.data() + r * m,
                                     X.grad.data() + r * m, r + 1);
    };
  }
  return out;
}

/// Row gather from an embedding table; gradient scatters back into the table.
template <typename T>
Tensor<T> embedding_rows(const Tensor<T>& table, const std::vector<int>& ids) {
  detail::check_2d(table, "embedding_rows");
  const std::int64_t v = table.dim(0), d = table.dim(1);
  const std::int64_t len = static_cast<std::int64_t>(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw std::invalid_argument("embedding_rows: id " + std::to_string(id) +
                                  " outside table " + shape_str(table.shape()));
    }
  }
  Tensor<T> out = Tensor<T>::zeros({len, d});
  for (std::int64_t i = 0; i < len; ++i) {
    const T* src = table.values().data() + static_cast<std::int64_t>(ids[i]) * d;
    std::copy(src, src + d, out.values().data() + i * d);
  }
  if (detail::record(table)) {
    auto node = out.node();
    node->parents = {table.node()};
    node->backward_op = [ids, d](TensorNode<T>& self) {
      auto& Tb = *self.parents[0];
      if (!Tb.tracked()) return;
      Tb.ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        T* dst = Tb.grad.data() + static_cast<std::int64_t>(ids[i]) * d;
        const T* g = self.grad.data() + static_cast<std::int64_t>(i) * d;
        for (std::int64_t j = 0; j < d; ++j) dst[j] += g[j];
      }
    };
  }
  return out;
}

/// Concatenation along the sequence (row) axis of 2-d tensors.
template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  const std::int64_t cols = parts[0].dim(1);
  std::int64_t rows = 0;
  for (const auto& p : parts) {
    detail::check_2d(p, "concat_rows");
    if (p.dim(1) != cols) {
      throw std::invalid_argument("concat_rows: column mismatch, " + shape_str(p.shape()) +
                                  " vs " + shape_str(parts[0].shape()));
    }
    rows += p.dim(0);
  }
  Tensor<T> out = Tensor<T>::zeros({rows, cols});
  std::int64_t r = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), out.values().begin() + r * cols);
    r += p.dim(0);
  }
  bool any = false;
  for (const auto& p : parts) any = any || detail::record(p);
  if (any) {
    auto node = out.node();
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward_op = [cols](TensorNode<T>& self) {
      std::int64_t r = 0;
      for (auto& pp : self.parents) {
        const std::int64_t pr = pp->size() / cols;
        if (pp->tracked()) {
          pp->ensure_grad();
          for (std::int64_t i = 0; i < pr * cols; ++i) pp->grad[i] += self.grad[r * cols + i];
        }
        r += pr;
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::int64_t start, std::int64_t len) {
  detail::check_2d(x, "slice_rows");
  const std::int64_t m = x.dim(0), n = x.dim(1);
  if (start < 0 || len < 0 || start + len > m) {
    throw std::invalid_argument("slice_rows: [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") outside " + shape_str(x.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({len, n});
  std::copy(x.values().begin() + start * n, x.values().begin() + (start + len) * n,
            out.values().begin());
  if (detail::record(x)) {
    auto node = out.node();
    node->parents = {x.node()};
    node->backward_op = [start, len, n](TensorNode<T>& self) {
      auto& X = *self.parents[0];
      if (!X.tracked()) return;
      X.ensure_grad();
      for (std::int64_t i = 0; i < len * n; ++i) X.grad[start * n + i] += self.grad[i];
    };
  }
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::int64_t start, std::int64_t len) {
  detail::check_2d(x, "slice_cols");
  const std::int64_t m = x.dim(0), n = x.dim(1);
  if (start < 0 || len < 0 || start + len > n) {
    throw std::invalid_argument("slice_cols: [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") outside " + shape_str(x.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({m, len});
  for (std::int64_t i = 0; i < m; ++i)
    std::copy(x.values().begin() + i * n + start, x.values().begin() + i * n + start + len,
              out.values().begin() + i * len);
  if (detail::record(x)) {
    auto node = out.node();
    node->parents = {x.node()};
    node->backward_op = [m, n, start, len](TensorNode<T>& self) {
      auto& X = *self.parents[0];
      if (!X.tracked()) return;
      X.ensure_grad();
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < len; ++j)
          X.grad[i * n + start + j] += self.grad[i * len + j];
    };
  }
  return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  const std::int64_t rows = parts[0].dim(0);
  std::int64_t cols = 0;
  for (const auto& p : parts) {
    detail::check_2d(p, "concat_cols");
    if (p.dim(0) != rows) {
      throw std::invalid_argument("concat_cols: row mismatch, " + shape_str(p.shape()) +
                                  " vs " + shape_str(parts[0].shape()));
    }
    cols += p.dim(1);
  }
  Tensor<T> out = Tensor<T>::zeros({rows, cols});
  std::int64_t c = 0;
  for (const auto& p : parts) {
    const std::int64_t pc = p.dim(1);
    for (std::int64_t i = 0; i < rows; ++i)
      std::copy(p.values().begin() + i * pc, p.values().begin() + (i + 1) * pc,
                out.values().begin() + i * cols + c);
    c += pc;
  }
  bool any = false;
  for (const auto& p : parts) any = any || detail::record(p);
  if (any) {
    auto node = out.node();
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward_op = [rows, cols](TensorNode<T>& self) {
      std::int64_t c = 0;
      for (auto& pp : self.parents) {
        const std::int64_t pc = pp->size() / rows;
        if (pp->tracked()) {
          pp->ensure_grad();
          for (std::int64_t i = 0; i < rows; ++i)
            for (std::int64_t j = 0; j < pc; ++j)
              pp->grad[i * pc + j] += self.grad[i * cols + c + j];
        }
        c += pc;
      }
    };
  }
  return out;
}

/// Mean negative log likelihood of `targets` under row-softmax of `logits`,
/// taken only at the selected positions. Positions not listed contribute
/// nothing, which is what enforces answer-position-only losses.
template <typename T>
Tensor<T> cross_entropy_selected(const Tensor<T>& logits, const std::vector<int>& positions,
                                 const std::vector<int>& targets) {
  detail::check_2d(logits, "cross_entropy_selected");
  if (positions.size() != targets.size() || positions.empty()) {
    throw std::invalid_argument("cross_entropy_selected: need equal, non-empty position/target lists");
  }
  const std::int64_t rows = logits.dim(0), v = logits.dim(1);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] < 0 || positions[i] >= rows)
      throw std::invalid_argument("cross_entropy_selected: position " +
                                  std::to_string(positions[i]) + " outside " +
                                  shape_str(logits.shape()));
    if (targets[i] < 0 || targets[i] >= v)
      throw std::invalid_argument("cross_entropy_selected: target " +
                                  std::to_string(targets[i]) + " outside vocab " +
                                  std::to_string(v));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const T* row = logits.values().data() + static_cast<std::int64_t>(positions[i]) * v;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < v; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (std::int64_t j = 0; j < v; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
    total += (mx + std::log(sum)) - static_cast<double>(row[targets[i]]);
  }
  const double inv_count = 1.0 / static_cast<double>(positions.size());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total * inv_count));
  if (detail::record(logits)) {
    auto node = out.node();
    node->parents = {logits.node()};
    node->backward_op = [positions, targets, v, inv_count](TensorNode<T>& self) {
      auto& L = *self.parents[0];
      if (!L.tracked()) return;
      L.ensure_grad();
      const double g = static_cast<double>(self.grad[0]) * inv_count;
      for (std::size_t i = 0; i < positions.size(); ++i) {
        const T* row = L.values.data() + static_cast<std::int64_t>(positions[i]) * v;
        T* grow = L.grad.data() + static_cast<std::int64_t>(positions[i]) * v;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < v; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double sum = 0.0;
        for (std::int64_t j = 0; j < v; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
        const double inv_sum = 1.0 / sum;
        for (std::int64_t j = 0; j < v; ++j) {
          const double p = std::exp(static_cast<double>(row[j]) - mx) * inv_sum;
          const double ind = (j == targets[i]) ? 1.0 : 0.0;
          grow[j] += static_cast<T>(g * (p - ind));
        }
      }
    };
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0.0;
  for (const T v : x.values()) acc += static_cast<double>(v);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
  if (detail::record(x)) {
    auto node = out.node();
    node->parents = {x.node()};
    node->backward_op = [](TensorNode<T>& self) {
      auto& X = *self.parents[0];
      if (!X.tracked()) return;
      X.ensure_grad();
      for (auto& g : X.grad) g += self.grad[0];
    };
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace taxlab::num
