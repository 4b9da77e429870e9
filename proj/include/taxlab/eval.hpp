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

#include "taxlab/manipulations.hpp"
#include "taxlab/metrics.hpp"
#include "taxlab/stimuli.hpp"
#include "taxlab/vlm.hpp"

namespace taxlab::eval {

enum class Bucket { leaf, seen_hypernym, unseen_hypernym };

inline const char* bucket_name(Bucket b) {
  switch (b) {
    case Bucket::leaf: return "leaf";
    case Bucket::seen_hypernym: return "seen";
    default: return "unseen";
  }
}

/// Per-(category, bucket) scores plus aggregates. A hypernym question is
/// "unseen" when its pair's positive (image-leaf, hypernym) mapping was
/// removed by the run's ablation; negatives inherit their pair's bucket.
struct EvalReport {
  struct Cell {
    std::string category;
    taxo::Level level{taxo::Level::leaf};
    Bucket bucket{Bucket::leaf};
    std::size_t yes_count{0};
    std::size_t no_count{0};
    double f1{0.0};
    double baseline_f1{0.0};
    double coherence{0.0};
  };
  std::vector<Cell> cells;
  std::map<std::string, double> bucket_mean;
  std::map<std::string, double> bucket_baseline;
  std::size_t total_items{0};
  nlohmann::json metadata;

  std::vector<double> bucket_f1s(Bucket b) const {
    std::vector<double> out;
    for (const auto& c : cells)
      if (c.bucket == b) out.push_back(c.f1);
    return out;
  }

  const Cell* find_cell(const std::string& category, Bucket b) const {
    for (const auto& c : cells)
      if (c.category == category && c.bucket == b) return &c;
    return nullptr;
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : cells) {
      rows.push_back({{"category", c.category},
                      {"level", c.level == taxo::Level::leaf ? "leaf" : "hypernym"},
                      {"bucket", bucket_name(c.bucket)},
                      {"yes_count", c.yes_count},
                      {"no_count", c.no_count},
                      {"f1", c.f1},
                      {"baseline_f1", c.baseline_f1},
                      {"coherence", c.coherence}});
    }
    nlohmann::json j;
    j["cells"] = rows;
    j["bucket_mean"] = bucket_mean;
    j["bucket_baseline"] = bucket_baseline;
    j["total_items"] = total_items;
    j["metadata"] = metadata;
    return j;
  }

  /// One row per category cell; plot-ready.
  std::string to_csv() const {
    std::ostringstream os;
    os << "category,level,bucket,yes_count,no_count,f1,baseline_f1,coherence\n";
    for (const auto& c : cells) {
      os << c.category << ',' << (c.level == taxo::Level::leaf ? "leaf" : "hypernym") << ','
         << bucket_name(c.bucket) << ',' << c.yes_count << ',' << c.no_count << ',' << c.f1
         << ',' << c.baseline_f1 << ',' << c.coherence << '\n';
    }
    return os.str();
  }

  std::string summary_table() const {
    std::ostringstream os;
    char line[128];
    std::snprintf(line, sizeof(line), "%-10s %10s %10s %8s\n", "bucket", "mean_f1", "baseline",
                  "cells");
    os << line;
    for (const auto& [bucket, mean] : bucket_mean) {
      std::size_t n = 0;
      for (const auto& c : cells)
        if (bucket_name(c.bucket) == bucket) ++n;
      std::snprintf(line, sizeof(line), "%-10s %10.2f %10.2f %8zu\n", bucket.c_str(), mean,
                    bucket_baseline.at(bucket), n);
      os << line;
    }
    return os.str();
  }

  std::uint64_t checksum() const { return fnv1a(to_json().dump()); }
};

/// Runs predict on every test stimulus and fills the report. The world must
/// be the one the projector was trained against (relabelings included).
inline EvalReport evaluate(const vlm::Projector& projector, const lm::TinyLM& m,
                           const std::vector<stim::Stimulus>& stimuli,
                           const world::FeatureWorld& w, const manip::AblationSpec& spec,
                           const taxo::Taxonomy& tax,
                           const corpus::ArticleRules& articles = {}) {
  // Pair id -> positive stimulus, for bucket assignment.
  std::map<std::string, const stim::Stimulus*> pair_positive;
  for (const auto& s : stimuli)
    if (s.split == world::Split::test && s.positive) pair_positive[s.pair_id] = &s;

  const auto bucket_of = [&](const stim::Stimulus& s) {
    auto it = pair_positive.find(s.pair_id);
    if (it == pair_positive.end())
      throw std::runtime_error("evaluate: no positive found for pair '" + s.pair_id + "'");
    const auto& pos = *it->second;
    if (pos.level == taxo::Level::leaf) return Bucket::leaf;
    return spec.removed(pos.image_leaf, pos.question_category) ? Bucket::unseen_hypernym
                                                               : Bucket::seen_hypernym;
  };

  const auto index = vlm::detail::image_index(w);
  struct CellData {
    std::vector<bool> predicted, actual;
    taxo::Level level;
  };
  std::map<std::pair<std::string, Bucket>, CellData> groups;
  std::size_t total = 0, yes_total = 0;
  for (const auto& s : stimuli) {
    if (s.split != world::Split::test) continue;
    auto it = index.find(s.image_id);
    if (it == index.end())
      throw std::runtime_error("evaluate: image '" + s.image_id + "' missing from world");
    const auto question = stim::render_question(s.question_category, m.vocab, articles);
    const auto pred = vlm::predict(projector, m, *it->second, question);
    auto& cell = groups[{s.question_category, bucket_of(s)}];
    cell.predicted.push_back(pred.yes);
    cell.actual.push_back(s.expect_yes);
    cell.level = s.level;
    ++total;
    if (s.expect_yes) ++yes_total;
  }
  if (total == 0) throw std::invalid_argument("evaluate: no test stimuli");
  const bool majority_yes = 2 * yes_total > total;

  EvalReport report;
  report.total_items = total;
  std::map<std::string, std::vector<double>> means, baselines;
  for (const auto& [key, data] : groups) {
    EvalReport::Cell cell;
    cell.category = key.first;
    cell.bucket = key.second;
    cell.level = data.level;
    for (bool a : data.actual) (a ? cell.yes_count : cell.no_count) += 1;
    cell.f1 = macro_f1(data.predicted, data.actual);
    const std::vector<bool> constant(data.actual.size(), majority_yes);
    cell.baseline_f1 = macro_f1(constant, data.actual);
    try {
      cell.coherence = visual_coherence(w, cell.category, tax);
    } catch (const std::exception&) {
      cell.coherence = std::numeric_limits<double>::quiet_NaN();
    }
    means[bucket_name(cell.bucket)].push_back(cell.f1);
    baselines[bucket_name(cell.bucket)].push_back(cell.baseline_f1);
    report.cells.push_back(std::move(cell));
  }
  for (const auto& [bucket, f1s] : means) {
    double acc = 0.0;
    for (double f : f1s) acc += f;
    report.bucket_mean[bucket] = acc / static_cast<double>(f1s.size());
    double bacc = 0.0;
    for (double f : baselines.at(bucket)) bacc += f;
    report.bucket_baseline[bucket] = bacc / static_cast<double>(f1s.size());
  }
  return report;
}

}  // namespace taxlab::eval
