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
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxlab/rng.hpp"
#include "taxlab/taxonomy.hpp"
#include "taxlab/util.hpp"

namespace taxlab::world {

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split name: " + s);
}

struct ImageFeature {
  std::string image_id;
  Split split{Split::train};
  std::vector<float> vec;  // unit L2 norm
};

/// The grounded half of the world: per-leaf unit-normalized feature vectors
/// with image identities, split tags and provenance.
struct FeatureWorld {
  int dim{0};
  std::map<std::string, std::vector<ImageFeature>> by_leaf;
  std::string provenance;   // JSON text describing how the vectors were made
  bool splits_assigned{false};

  std::size_t image_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : by_leaf) n += v.size();
    return n;
  }

  std::uint64_t checksum() const {
    std::uint64_t h = fnv1a(std::to_string(dim));
    for (const auto& [leaf, imgs] : by_leaf) {
      h = fnv1a(leaf, h);
      for (const auto& im : imgs) {
        h = fnv1a(im.image_id, h);
        h = fnv1a(split_name(im.split), h);
        h = fnv1a(im.vec.data(), im.vec.size() * sizeof(float), h);
      }
    }
    return h;
  }

  const ImageFeature& find_image(const std::string& leaf, const std::string& image_id) const {
    auto it = by_leaf.find(leaf);
    if (it == by_leaf.end()) throw std::invalid_argument("world: unknown leaf '" + leaf + "'");
    for (const auto& im : it->second)
      if (im.image_id == image_id) return im;
    throw std::invalid_argument("world: image '" + image_id + "' not found under '" + leaf + "'");
  }
};

namespace detail {

inline void normalize_unit(std::vector<float>& v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (norm == 0.0) throw std::runtime_error("feature vector with zero norm cannot be normalized");
  for (float& x : v) x = static_cast<float>(x / norm);
}

}  // namespace detail

/// Default generator knobs. The sigma ratios put mean per-hypernym coherence
/// around 0.27; expected coherence is roughly
/// sigma_hyper^2 / (sigma_hyper^2 + sigma_leaf^2 + sigma_image^2).
struct GeneratorPreset {
  int dim{64};
  double sigma_hyper{1.0};
  double sigma_leaf{1.2};
  double sigma_image{1.15};
  int images_per_leaf{8};
};

/// Hierarchical feature generator: hypernym centers drawn isotropically, leaf
/// centers around one (randomly chosen) home hypernym, image vectors around
/// the leaf center, everything unit-normalized at the end. The three sigmas
/// are the coherence knobs.
inline FeatureWorld generate_features(const taxo::Taxonomy& tax, int dim, double sigma_hyper,
                                      double sigma_leaf, double sigma_image,
                                      int images_per_leaf, std::uint64_t seed) {
  if (dim < 8) throw std::invalid_argument("generate_features: dim must be >= 8");
  if (sigma_hyper <= 0 || sigma_leaf <= 0 || sigma_image <= 0)
    throw std::invalid_argument("generate_features: all sigmas must be positive");
  if (images_per_leaf < 4)
    throw std::invalid_argument(
        "generate_features: need >= 4 images per leaf for a non-degenerate split");

  FeatureWorld w;
  w.dim = dim;
  std::map<std::string, std::vector<double>> centers;
  for (const auto& hy : tax.hypernyms) {
    Rng rng(derive_seed(seed, "hyper:" + hy));
    std::vector<double> c(static_cast<std::size_t>(dim));
    for (auto& x : c) x = rng.gaussian() * sigma_hyper;
    centers[hy] = std::move(c);
  }
  for (const auto& [leaf, hyps] : tax.members) {
    Rng rng(derive_seed(seed, "leaf:" + leaf));
    // A multi-hypernym leaf anchors to a single home hypernym: one image has
    // one appearance.
    const auto& home = hyps[rng.below(hyps.size())];
    const auto& hc = centers.at(home);
    std::vector<double> lc(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) lc[j] = hc[j] + rng.gaussian() * sigma_leaf;
    auto& imgs = w.by_leaf[leaf];
    imgs.reserve(static_cast<std::size_t>(images_per_leaf));
    char buf[32];
    for (int i = 0; i < images_per_leaf; ++i) {
      ImageFeature im;
      std::snprintf(buf, sizeof(buf), "_img%03d", i);
      im.image_id = leaf + buf;
      im.vec.resize(static_cast<std::size_t>(dim));
      for (int j = 0; j < dim; ++j)
        im.vec[j] = static_cast<float>(lc[j] + rng.gaussian() * sigma_image);
      detail::normalize_unit(im.vec);
      imgs.push_back(std::move(im));
    }
  }
  nlohmann::json prov;
  prov["kind"] = "synthetic";
  prov["dim"] = dim;
  prov["sigma_hyper"] = sigma_hyper;
  prov["sigma_leaf"] = sigma_leaf;
  prov["sigma_image"] = sigma_image;
  prov["images_per_leaf"] = images_per_leaf;
  prov["seed"] = seed;
  w.provenance = prov.dump();
  return w;
}

inline FeatureWorld generate_features(const taxo::Taxonomy& tax, const GeneratorPreset& p,
                                      std::uint64_t seed) {
  return generate_features(tax, p.dim, p.sigma_hyper, p.sigma_leaf, p.sigma_image,
                           p.images_per_leaf, seed);
}

/// Ingests externally exported embeddings: a JSON manifest next to a binary
/// file of little-endian float32 rows. Record offsets are in float elements
/// from the start of the file.
inline FeatureWorld ingest_embeddings(const std::string& manifest_path,
                                      const taxo::Taxonomy* tax = nullptr) {
  nlohmann::json m = nlohmann::json::parse(read_text_file(manifest_path));
  if (!m.contains("dim") || !m.contains("records"))
    throw std::runtime_error("embedding manifest: needs 'dim' and 'records'");
  FeatureWorld w;
  w.dim = m.at("dim").get<int>();
  std::filesystem::path bin_path;
  if (m.contains("data")) {
    bin_path = std::filesystem::path(manifest_path).parent_path() /
               m.at("data").get<std::string>();
  } else {
    bin_path = std::filesystem::path(manifest_path);
    bin_path.replace_extension(".bin");
  }
  std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
  if (!bin) throw std::runtime_error("embedding manifest: missing data file " + bin_path.string());
  const std::uint64_t n_floats = static_cast<std::uint64_t>(bin.tellg()) / sizeof(float);

  std::size_t unknown_leaves = 0, bad_dims = 0;
  bool any_split = false, all_split = true;
  for (const auto& rec : m.at("records")) {
    const auto leaf = rec.at("leaf").get<std::string>();
    if (tax && !tax->is_leaf(leaf)) {
      ++unknown_leaves;
      continue;
    }
    const std::uint64_t offset = rec.at("offset").get<std::uint64_t>();
    if (offset + static_cast<std::uint64_t>(w.dim) > n_floats) {
      ++bad_dims;
      continue;
    }
    ImageFeature im;
    im.image_id = rec.at("image_id").get<std::string>();
    if (rec.contains("split")) {
      im.split = split_from_name(rec.at("split").get<std::string>());
      any_split = true;
    } else {
      all_split = false;
    }
    im.vec.resize(static_cast<std::size_t>(w.dim));
    bin.seekg(static_cast<std::streamoff>(offset * sizeof(float)));
    bin.read(reinterpret_cast<char*>(im.vec.data()),
             static_cast<std::streamsize>(w.dim * sizeof(float)));
    if (!bin) throw std::runtime_error("embedding manifest: short read at offset " +
                                       std::to_string(offset));
    detail::normalize_unit(im.vec);
    w.by_leaf[leaf].push_back(std::move(im));
  }
  if (unknown_leaves > 0 || bad_dims > 0) {
    throw std::runtime_error("embedding manifest rejected: " + std::to_string(unknown_leaves) +
                             " records with leaves absent from taxonomy, " +
                             std::to_string(bad_dims) + " records outside the data file");
  }
  w.splits_assigned = any_split && all_split;
  nlohmann::json prov;
  prov["kind"] = "ingested";
  prov["manifest"] = manifest_path;
  w.provenance = prov.dump();
  return w;
}

/// Writes the manifest + binary pair that ingest_embeddings reads back.
inline void export_embeddings(const FeatureWorld& w, const std::string& manifest_path) {
  std::filesystem::path bin_path(manifest_path);
  bin_path.replace_extension(".bin");
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + bin_path.string());
  nlohmann::json records = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [leaf, imgs] : w.by_leaf) {
    for (const auto& im : imgs) {
      nlohmann::json rec;
      rec["image_id"] = im.image_id;
      rec["leaf"] = leaf;
      if (w.splits_assigned) rec["split"] = split_name(im.split);
      rec["offset"] = offset;
      records.push_back(rec);
      bin.write(reinterpret_cast<const char*>(im.vec.data()),
                static_cast<std::streamsize>(im.vec.size() * sizeof(float)));
      offset += im.vec.size();
    }
  }
  nlohmann::json m;
  m["dim"] = w.dim;
  m["data"] = bin_path.filename().string();
  m["records"] = records;
  write_text_file(manifest_path, m.dump(2) + "\n");
}

}  // namespace taxlab::world
