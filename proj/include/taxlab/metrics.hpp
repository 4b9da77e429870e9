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
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "taxlab/taxonomy.hpp"
#include "taxlab/world.hpp"

namespace taxlab::eval {

/// Macro F1 over the two answer classes, scaled to [0, 100]. A class with no
/// predicted and no actual positives scores 0, which is what makes the
/// always-"no" baseline arithmetic come out right on imbalanced sets.
inline double macro_f1(const std::vector<bool>& predicted_yes,
                       const std::vector<bool>& actual_yes) {
  if (predicted_yes.empty() || predicted_yes.size() != actual_yes.size())
    throw std::invalid_argument("macro_f1: need equal, non-empty prediction/label lists");
  const auto class_f1 = [&](bool cls) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted_yes.size(); ++i) {
      const bool p = predicted_yes[i] == cls;
      const bool a = actual_yes[i] == cls;
      if (p && a) ++tp;
      else if (p && !a) ++fp;
      else if (!p && a) ++fn;
    }
    if (2 * tp + fp + fn == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  };
  return 100.0 * 0.5 * (class_f1(true) + class_f1(false));
}

/// Mean pairwise cosine among a category's train-split images. For a hypernym
/// the images of all member leaves are pooled. Images enter in sorted
/// image_id order so the value is bit-stable under relabelings that keep the
/// image set fixed.
inline double visual_coherence(const world::FeatureWorld& w, const std::string& category,
                               const taxo::Taxonomy& tax,
                               world::Split split = world::Split::train) {
  std::vector<const world::ImageFeature*> imgs;
  const auto collect = [&](const std::string& leaf) {
    auto it = w.by_leaf.find(leaf);
    if (it == w.by_leaf.end()) return;
    for (const auto& im : it->second)
      if (!w.splits_assigned || im.split == split) imgs.push_back(&im);
  };
  if (tax.is_hypernym(category)) {
    for (const auto& leaf : tax.leaves_under(category)) collect(leaf);
  } else if (tax.is_leaf(category)) {
    collect(category);
  } else {
    throw std::invalid_argument("visual_coherence: unknown category '" + category + "'");
  }
  if (imgs.size() < 2)
    throw std::invalid_argument("visual_coherence: category '" + category +
                                "' has fewer than 2 images in the split");
  std::sort(imgs.begin(), imgs.end(),
            [](const auto* a, const auto* b) { return a->image_id < b->image_id; });
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    for (std::size_t j = i + 1; j < imgs.size(); ++j) {
      double dot = 0.0;
      const auto& a = imgs[i]->vec;
      const auto& b = imgs[j]->vec;
      for (std::size_t k = 0; k < a.size(); ++k)
        dot += static_cast<double>(a[k]) * static_cast<double>(b[k]);
      total += dot;  // vectors are unit norm; the dot is the cosine
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

struct CorrelationSummary {
  bool r_defined{false};
  double r{0.0};
  double slope{0.0};
  double intercept{0.0};
  double slope_stderr{0.0};
  double intercept_stderr{0.0};
  std::size_t n{0};
  // Ordinary least squares + Pearson correlation stand in for the original
  // mixed-effects analysis; consumers should not compare t statistics across
  // the two.
  std::string note{"OLS + Pearson r (simplification of a mixed-effects analysis)"};
};

/// Pearson r plus an OLS line y = intercept + slope * x with standard errors.
inline CorrelationSummary coherence_analysis(const std::vector<double>& x,
                                             const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("coherence_analysis: need >= 3 paired points");
  CorrelationSummary s;
  s.n = x.size();
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    s.r_defined = false;  // zero variance: r undefined, reported as such
    return s;
  }
  s.r_defined = true;
  s.r = sxy / std::sqrt(sxx * syy);
  s.slope = sxy / sxx;
  s.intercept = my - s.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double resid = y[i] - (s.intercept + s.slope * x[i]);
    sse += resid * resid;
  }
  const double sigma2 = sse / (n - 2.0);
  s.slope_stderr = std::sqrt(sigma2 / sxx);
  s.intercept_stderr = std::sqrt(sigma2 * (1.0 / n + mx * mx / sxx));
  return s;
}

struct TTestResult {
  bool degenerate{false};
  double t{0.0};
  double p{1.0};
  double df{0.0};
};

/// Welch two-sample t test over per-category scores.
inline TTestResult paired_comparison(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("paired_comparison: need >= 2 categories per side");
  const auto mean_var = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= (n - 1.0);
    return std::pair<double, double>{m, var};
  };
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  TTestResult r;
  const double se2 = va / na + vb / nb;
  if (se2 == 0.0) {
    r.degenerate = true;  // zero variance on both sides
    r.t = (ma == mb) ? 0.0 : std::numeric_limits<double>::infinity();
    r.p = (ma == mb) ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace taxlab::eval
