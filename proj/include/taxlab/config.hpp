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
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "taxlab/corpus.hpp"
#include "taxlab/lm.hpp"
#include "taxlab/util.hpp"
#include "taxlab/vlm.hpp"
#include "taxlab/world.hpp"

namespace taxlab::cfg {

// Minimal TOML-style reader: one level of [tables], scalar values (integer,
// float, bool, quoted string) and flat arrays. Enough for diffable experiment
// configs without pulling in a full parser.

using TomlValue = std::variant<std::int64_t, double, bool, std::string, std::vector<double>>;

struct TomlDoc {
  std::map<std::string, std::map<std::string, TomlValue>> tables;  // "" = root
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline TomlValue parse_scalar(const std::string& raw, const std::string& where) {
  const std::string v = trim(raw);
  if (v.empty()) throw std::runtime_error("config: empty value at " + where);
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw std::runtime_error("config: unterminated string at " + where);
    return v.substr(1, v.size() - 2);
  }
  try {
    std::size_t used = 0;
    if (v.find('.') == std::string::npos && v.find('e') == std::string::npos &&
        v.find('E') == std::string::npos) {
      const std::int64_t i = std::stoll(v, &used);
      if (used == v.size()) return i;
    }
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw std::runtime_error("config: cannot parse value '" + v + "' at " + where);
}

}  // namespace detail

inline TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  std::string current;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config: bad table header at " + where);
      current = detail::trim(line.substr(1, line.size() - 2));
      if (current.empty()) throw std::runtime_error("config: empty table name at " + where);
      doc.tables[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value at " + where);
    const std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config: empty key at " + where);
    if (doc.tables[current].count(key))
      throw std::runtime_error("config: duplicate key '" + key + "' at " + where);
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']')
        throw std::runtime_error("config: unterminated array at " + where);
      std::vector<double> arr;
      std::string body = value.substr(1, value.size() - 2);
      std::istringstream items(body);
      std::string item;
      while (std::getline(items, item, ',')) {
        item = detail::trim(item);
        if (item.empty()) continue;
        const auto sv = detail::parse_scalar(item, where);
        if (std::holds_alternative<std::int64_t>(sv))
          arr.push_back(static_cast<double>(std::get<std::int64_t>(sv)));
        else if (std::holds_alternative<double>(sv))
          arr.push_back(std::get<double>(sv));
        else
          throw std::runtime_error("config: arrays hold numbers only at " + where);
      }
      doc.tables[current][key] = arr;
    } else {
      doc.tables[current][key] = detail::parse_scalar(value, where);
    }
  }
  return doc;
}

/// Resolved experiment configuration, one table per module.
struct Config {
  int version{1};

  struct TaxonomySection {
    std::string path;  // when set, load instead of generating
    std::string annotations_csv;
    int n_hypernyms{6};
    int leaves_per_hypernym{5};
    double multi_membership_rate{0.3};
    std::uint64_t seed{11};
  } taxonomy;

  struct WorldSection {
    std::string manifest;  // when set, ingest instead of generating
    int dim{64};
    double sigma_hyper{1.0};
    double sigma_leaf{1.2};
    double sigma_image{0.7};
    int images_per_leaf{8};
    std::uint64_t seed{21};
  } world;

  struct CorpusSection {
    std::uint64_t seed{5};
    int hearst{2};
    int copular{2};
    int frames{3};
    int type_qa{2};
    int presence_qa{4};
    int match_qa{4};
    int filler{50};
  } corpus;

  lm::LmConfig lm_arch;          // [lm]
  double lm_random_init_std{0.3};
  lm::LmTrainConfig lm_train;    // [lm_train]
  vlm::TrainConfig projector;    // [projector_train]

  struct StimuliSection {
    int negatives_per_positive{1};
    std::uint64_t split_seed{31};
    std::uint64_t seed{41};
  } stimuli;

  struct ExperimentSection {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<double> random_levels{0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
    std::vector<int> systematic_counts;  // defaulted from taxonomy size when empty
    std::vector<double> counterfactual_levels{0.5, 1.0};
    std::vector<double> coherence_sigmas{0.4, 0.8, 1.2, 1.6};
    std::vector<std::uint64_t> coherence_seeds{1, 2};
    int pair_swap_min_leaves{4};
    int pair_swap_sample{4};
    double pair_swap_gap{0.05};
    int pair_swap_pairs{2};
    int probe_draws{8};
    std::uint64_t probe_seed{3};
    int jobs{1};
  } experiment;

  corpus::CorpusSpec corpus_spec() const {
    corpus::CorpusSpec spec;
    spec.seed = corpus.seed;
    spec.sentences_per_pattern = {{"hearst", corpus.hearst},     {"copular", corpus.copular},
                                  {"frames", corpus.frames},     {"type_qa", corpus.type_qa},
                                  {"presence_qa", corpus.presence_qa},
                                  {"match_qa", corpus.match_qa}, {"filler", corpus.filler}};
    return spec;
  }

  std::vector<int> systematic_counts_or_default() const {
    if (!experiment.systematic_counts.empty()) return experiment.systematic_counts;
    std::vector<int> out;
    for (double level : experiment.random_levels)
      out.push_back(static_cast<int>(std::floor(level * taxonomy.n_hypernyms + 0.5)));
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = version;
    j["taxonomy"] = {{"path", taxonomy.path},
                     {"annotations_csv", taxonomy.annotations_csv},
                     {"n_hypernyms", taxonomy.n_hypernyms},
                     {"leaves_per_hypernym", taxonomy.leaves_per_hypernym},
                     {"multi_membership_rate", taxonomy.multi_membership_rate},
                     {"seed", taxonomy.seed}};
    j["world"] = {{"manifest", world.manifest},
                  {"dim", world.dim},
                  {"sigma_hyper", world.sigma_hyper},
                  {"sigma_leaf", world.sigma_leaf},
                  {"sigma_image", world.sigma_image},
                  {"images_per_leaf", world.images_per_leaf},
                  {"seed", world.seed}};
    j["corpus"] = {{"seed", corpus.seed},         {"hearst", corpus.hearst},
                   {"copular", corpus.copular},   {"frames", corpus.frames},
                   {"type_qa", corpus.type_qa},   {"presence_qa", corpus.presence_qa},
                   {"match_qa", corpus.match_qa}, {"filler", corpus.filler}};
    j["lm"] = lm_arch;
    j["lm_random_init_std"] = lm_random_init_std;
    j["lm_train"] = lm_train;
    j["projector_train"] = projector;
    j["stimuli"] = {{"negatives_per_positive", stimuli.negatives_per_positive},
                    {"split_seed", stimuli.split_seed},
                    {"seed", stimuli.seed}};
    j["experiment"] = {{"seeds", experiment.seeds},
                       {"random_levels", experiment.random_levels},
                       {"systematic_counts", experiment.systematic_counts},
                       {"counterfactual_levels", experiment.counterfactual_levels},
                       {"coherence_sigmas", experiment.coherence_sigmas},
                       {"coherence_seeds", experiment.coherence_seeds},
                       {"pair_swap_min_leaves", experiment.pair_swap_min_leaves},
                       {"pair_swap_sample", experiment.pair_swap_sample},
                       {"pair_swap_gap", experiment.pair_swap_gap},
                       {"pair_swap_pairs", experiment.pair_swap_pairs},
                       {"probe_draws", experiment.probe_draws},
                       {"probe_seed", experiment.probe_seed},
                       {"jobs", experiment.jobs}};
    return j;
  }

  std::uint64_t checksum() const { return fnv1a(to_json().dump()); }
};

namespace detail {

class TableReader {
 public:
  TableReader(const TomlDoc& doc, const std::string& table) : table_(table) {
    auto it = doc.tables.find(table);
    if (it != doc.tables.end()) entries_ = &it->second;
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!entries_) return;
    auto it = entries_->find(key);
    if (it == entries_->end()) return;
    consumed_.insert(key);
    assign(it->second, out, key);
  }

  void check_consumed() const {
    if (!entries_) return;
    for (const auto& [key, _] : *entries_) {
      if (!consumed_.count(key))
        throw std::runtime_error("config: unknown key '" + key + "' in table [" + table_ + "]");
    }
  }

 private:
  template <typename T>
  void assign(const TomlValue& v, T& out, const char* key) {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!std::holds_alternative<std::string>(v)) fail(key, "string");
      out = std::get<std::string>(v);
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!std::holds_alternative<bool>(v)) fail(key, "bool");
      out = std::get<bool>(v);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!std::holds_alternative<std::vector<double>>(v)) fail(key, "array");
      out = std::get<std::vector<double>>(v);
    } else if constexpr (std::is_same_v<T, std::vector<int>> ||
                         std::is_same_v<T, std::vector<std::uint64_t>>) {
      if (!std::holds_alternative<std::vector<double>>(v)) fail(key, "array");
      out.clear();
      for (double d : std::get<std::vector<double>>(v))
        out.push_back(static_cast<typename T::value_type>(d));
    } else if constexpr (std::is_floating_point_v<T>) {
      if (std::holds_alternative<double>(v)) out = static_cast<T>(std::get<double>(v));
      else if (std::holds_alternative<std::int64_t>(v))
        out = static_cast<T>(std::get<std::int64_t>(v));
      else fail(key, "number");
    } else {
      if (!std::holds_alternative<std::int64_t>(v)) fail(key, "integer");
      out = static_cast<T>(std::get<std::int64_t>(v));
    }
  }

  [[noreturn]] void fail(const char* key, const char* want) const {
    throw std::runtime_error("config: key '" + std::string(key) + "' in [" + table_ +
                             "] must be a " + want);
  }

  const std::map<std::string, TomlValue>* entries_{nullptr};
  std::set<std::string> consumed_;
  std::string table_;
};

}  // namespace detail

inline Config config_from_toml(const TomlDoc& doc) {
  Config c;
  static const std::set<std::string> known_tables{
      "", "taxonomy", "world", "corpus", "lm", "lm_train", "projector_train",
      "stimuli", "experiment"};
  for (const auto& [table, entries] : doc.tables) {
    if (!known_tables.count(table))
      throw std::runtime_error("config: unknown table [" + table + "]");
    (void)entries;
  }
  detail::TableReader root(doc, "");
  root.get("version", c.version);
  root.check_consumed();
  if (c.version != 1)
    throw std::runtime_error("config: unsupported schema version " + std::to_string(c.version));

  detail::TableReader tax(doc, "taxonomy");
  tax.get("path", c.taxonomy.path);
  tax.get("annotations_csv", c.taxonomy.annotations_csv);
  tax.get("n_hypernyms", c.taxonomy.n_hypernyms);
  tax.get("leaves_per_hypernym", c.taxonomy.leaves_per_hypernym);
  tax.get("multi_membership_rate", c.taxonomy.multi_membership_rate);
  tax.get("seed", c.taxonomy.seed);
  tax.check_consumed();

  detail::TableReader wr(doc, "world");
  wr.get("manifest", c.world.manifest);
  wr.get("dim", c.world.dim);
  wr.get("sigma_hyper", c.world.sigma_hyper);
  wr.get("sigma_leaf", c.world.sigma_leaf);
  wr.get("sigma_image", c.world.sigma_image);
  wr.get("images_per_leaf", c.world.images_per_leaf);
  wr.get("seed", c.world.seed);
  wr.check_consumed();

  detail::TableReader co(doc, "corpus");
  co.get("seed", c.corpus.seed);
  co.get("hearst", c.corpus.hearst);
  co.get("copular", c.corpus.copular);
  co.get("frames", c.corpus.frames);
  co.get("type_qa", c.corpus.type_qa);
  co.get("presence_qa", c.corpus.presence_qa);
  co.get("match_qa", c.corpus.match_qa);
  co.get("filler", c.corpus.filler);
  co.check_consumed();

  detail::TableReader la(doc, "lm");
  la.get("d_model", c.lm_arch.d_model);
  la.get("n_heads", c.lm_arch.n_heads);
  la.get("n_blocks", c.lm_arch.n_blocks);
  la.get("context", c.lm_arch.context);
  la.get("init_std", c.lm_arch.init_std);
  la.get("random_init_std", c.lm_random_init_std);
  la.check_consumed();

  detail::TableReader lt(doc, "lm_train");
  lt.get("epochs", c.lm_train.epochs);
  lt.get("batch", c.lm_train.batch);
  lt.get("lr", c.lm_train.lr);
  lt.get("weight_decay", c.lm_train.weight_decay);
  lt.get("warmup_ratio", c.lm_train.warmup_ratio);
  lt.get("max_grad_norm", c.lm_train.max_grad_norm);
  lt.get("holdout_fraction", c.lm_train.holdout_fraction);
  lt.get("pack_sequences", c.lm_train.pack_sequences);
  lt.get("seed", c.lm_train.seed);
  lt.check_consumed();

  detail::TableReader pt(doc, "projector_train");
  pt.get("epochs", c.projector.epochs);
  pt.get("batch", c.projector.batch);
  pt.get("lr", c.projector.lr);
  pt.get("weight_decay", c.projector.weight_decay);
  pt.get("warmup_ratio", c.projector.warmup_ratio);
  pt.get("max_grad_norm", c.projector.max_grad_norm);
  pt.get("init_std", c.projector.init_std);
  pt.check_consumed();

  detail::TableReader st(doc, "stimuli");
  st.get("negatives_per_positive", c.stimuli.negatives_per_positive);
  st.get("split_seed", c.stimuli.split_seed);
  st.get("seed", c.stimuli.seed);
  st.check_consumed();

  detail::TableReader ex(doc, "experiment");
  ex.get("seeds", c.experiment.seeds);
  ex.get("random_levels", c.experiment.random_levels);
  ex.get("systematic_counts", c.experiment.systematic_counts);
  ex.get("counterfactual_levels", c.experiment.counterfactual_levels);
  ex.get("coherence_sigmas", c.experiment.coherence_sigmas);
  ex.get("coherence_seeds", c.experiment.coherence_seeds);
  ex.get("pair_swap_min_leaves", c.experiment.pair_swap_min_leaves);
  ex.get("pair_swap_sample", c.experiment.pair_swap_sample);
  ex.get("pair_swap_gap", c.experiment.pair_swap_gap);
  ex.get("pair_swap_pairs", c.experiment.pair_swap_pairs);
  ex.get("probe_draws", c.experiment.probe_draws);
  ex.get("probe_seed", c.experiment.probe_seed);
  ex.get("jobs", c.experiment.jobs);
  ex.check_consumed();
  return c;
}

inline Config load_config(const std::string& path) {
  return config_from_toml(parse_toml(read_text_file(path)));
}

/// Canned presets. "toy-default" is the reference desk-scale configuration;
/// "tiny" is a fast smoke-test setup.
inline Config preset(const std::string& name) {
  Config c;  // struct defaults == toy-default
  if (name == "toy-default") {
    c.lm_train.epochs = 60;
    c.lm_train.lr = 3e-3;
    c.projector.epochs = 10;
    c.projector.lr = 1e-2;
    c.projector.init_std = 0.1;
    return c;
  }
  if (name == "tiny") {
    c.taxonomy.n_hypernyms = 4;
    c.taxonomy.leaves_per_hypernym = 4;
    c.taxonomy.multi_membership_rate = 0.25;
    c.world.dim = 32;
    c.world.images_per_leaf = 6;
    c.lm_arch.d_model = 64;
    c.lm_train.epochs = 40;
    c.lm_train.lr = 3e-3;
    c.projector.epochs = 8;
    c.projector.lr = 1e-2;
    c.projector.init_std = 0.1;
    c.experiment.seeds = {1, 2};
    c.experiment.random_levels = {0.5, 1.0};
    c.experiment.counterfactual_levels = {1.0};
    c.experiment.coherence_sigmas = {0.5, 1.2};
    c.experiment.coherence_seeds = {1};
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (try: toy-default, tiny)");
}

}  // namespace taxlab::cfg
