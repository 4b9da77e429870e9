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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxlab/lm.hpp"
#include "taxlab/tensor.hpp"
#include "taxlab/util.hpp"

namespace taxlab::ckpt {

// Checkpoint container: magic, version, then per tensor
// (name, ndim, dims..., float32 data), everything little-endian. A JSON
// sidecar at <path>.json carries vocabulary and hyperparameters.

constexpr std::uint32_t kMagic = 0x544c434bU;  // "TLCK"
constexpr std::uint32_t kVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace detail

inline void save_tensors(const std::string& path,
                         const std::vector<num::Tensor<float>>& tensors) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  detail::write_pod(out, kMagic);
  detail::write_pod(out, kVersion);
  detail::write_pod(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    const auto& name = t.name();
    detail::write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod(out, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) detail::write_pod(out, static_cast<std::int64_t>(d));
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.values().size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline std::map<std::string, num::Tensor<float>> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  if (detail::read_pod<std::uint32_t>(in) != kMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  if (detail::read_pod<std::uint32_t>(in) != kVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  const auto count = detail::read_pod<std::uint32_t>(in);
  std::map<std::string, num::Tensor<float>> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto ndim = detail::read_pod<std::uint32_t>(in);
    std::vector<std::int64_t> shape;
    std::int64_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(detail::read_pod<std::int64_t>(in));
      total *= shape.back();
    }
    std::vector<float> values(static_cast<std::size_t>(total));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor '" + name + "' in " + path);
    out.emplace(name, num::Tensor<float>::parameter(name, shape, std::move(values)));
  }
  return out;
}

inline void save_lm(const lm::TinyLM& m, const std::string& path) {
  save_tensors(path, m.parameters());
  nlohmann::json side;
  side["kind"] = "tiny_lm";
  side["config"] = m.cfg;
  side["vocab"] = m.vocab.to_json();
  side["frozen"] = m.frozen;
  write_text_file(path + ".json", side.dump(2) + "\n");
}

inline lm::TinyLM load_lm(const std::string& path) {
  nlohmann::json side = nlohmann::json::parse(read_text_file(path + ".json"));
  if (side.at("kind").get<std::string>() != "tiny_lm")
    throw std::runtime_error("checkpoint: " + path + " is not an lm checkpoint");
  lm::TinyLM m;
  m.cfg = side.at("config").get<lm::LmConfig>();
  m.vocab = lm::Vocab::from_json(side.at("vocab"));
  auto tensors = load_tensors(path);
  const auto take = [&](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::runtime_error("checkpoint: missing tensor '" + name + "' in " + path);
    return it->second;
  };
  m.tok_emb = take("tok_emb");
  m.pos_emb = take("pos_emb");
  for (int b = 0; b < m.cfg.n_blocks; ++b) {
    const std::string p = "blocks." + std::to_string(b) + ".";
    m.blocks.push_back({take(p + "ln1_g"), take(p + "ln1_b"), take(p + "wq"), take(p + "wk"),
                        take(p + "wv"), take(p + "wo"), take(p + "ln2_g"), take(p + "ln2_b"),
                        take(p + "fc1"), take(p + "fc2")});
  }
  m.lnf_g = take("lnf_g");
  m.lnf_b = take("lnf_b");
  m.w_out = take("w_out");
  m.set_frozen(side.at("frozen").get<bool>());
  return m;
}

}  // namespace taxlab::ckpt
