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

#include <cstdio>
#include <filesystem>
#include <set>

#include "taxlab/taxonomy.hpp"

using namespace taxlab::taxo;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "taxlab_taxonomy_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("single leaf single hypernym counts") {
  auto p = temp_file("single.json");
  taxlab::write_text_file(p, R"({"hypernyms":["H"],"leaves":{"a":["H"]}})");
  auto t = load_taxonomy(p.string());
  auto s = stats(t);
  CHECK(s.leaf_count == 1);
  CHECK(s.hypernym_count == 1);
  CHECK(s.mean_hypernyms_per_leaf == 1.0);
}

TEST_CASE("unknown hypernym reference is rejected") {
  auto p = temp_file("bad_ref.json");
  taxlab::write_text_file(p, R"({"hypernyms":["H"],"leaves":{"a":["H","missing"]}})");
  CHECK_THROWS_WITH(load_taxonomy(p.string()),
                    Catch::Matchers::ContainsSubstring("missing"));
}

TEST_CASE("empty membership is rejected") {
  auto p = temp_file("empty_membership.json");
  taxlab::write_text_file(p, R"({"hypernyms":["H"],"leaves":{"a":[]}})");
  CHECK_THROWS(load_taxonomy(p.string()));
}

TEST_CASE("leaf-hypernym name clash is rejected") {
  auto p = temp_file("clash.json");
  taxlab::write_text_file(p, R"({"hypernyms":["H"],"leaves":{"H":["H"]}})");
  CHECK_THROWS(load_taxonomy(p.string()));
}

TEST_CASE("generated taxonomy with zero multi-membership") {
  auto t = generate_taxonomy(10, 12, 0.0, 1);
  auto s = stats(t);
  CHECK(s.leaf_count == 120);
  CHECK(s.hypernym_count == 10);
  CHECK(s.mean_hypernyms_per_leaf == 1.0);
  CHECK(s.max_hypernyms_per_leaf == 1);
}

TEST_CASE("multi-membership rate shapes the mean") {
  auto t = generate_taxonomy(10, 12, 0.5, 1);
  // Enumerate the generated membership and count directly.
  std::size_t pairs = 0;
  for (const auto& [_, hs] : t.members) pairs += hs.size();
  const double mean = double(pairs) / 120.0;
  CHECK(mean > 1.25);
  CHECK(mean < 1.75);
  CHECK(stats(t).mean_hypernyms_per_leaf == mean);
}

TEST_CASE("same seed reproduces the taxonomy, different seed varies it") {
  auto a = generate_taxonomy(6, 5, 0.3, 42);
  auto b = generate_taxonomy(6, 5, 0.3, 42);
  auto c = generate_taxonomy(6, 5, 0.3, 43);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());
}

TEST_CASE("degenerate parameters are rejected") {
  CHECK_THROWS(generate_taxonomy(1, 12, 0.0, 1));
  CHECK_THROWS(generate_taxonomy(5, 1, 0.0, 1));
}

TEST_CASE("generated taxonomy survives a serialize/parse round trip") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto t = generate_taxonomy(2 + seed % 7, 2 + seed % 5, 0.4, seed);
    auto p = temp_file("roundtrip.json");
    save_taxonomy(t, p.string());
    auto back = load_taxonomy(p.string());
    CHECK(back.checksum() == t.checksum());
  }
}

TEST_CASE("hypernym-level negative pool excludes every true hypernym") {
  auto p = temp_file("koala.json");
  taxlab::write_text_file(p, R"({
    "hypernyms": ["mammal", "animal", "vehicle", "tool"],
    "leaves": {"koala": ["mammal", "animal"], "car": ["vehicle"]}
  })");
  auto t = load_taxonomy(p.string());
  auto pool = negative_pool(t, "koala", Level::hypernym);
  std::set<std::string> got(pool.begin(), pool.end());
  CHECK(got == std::set<std::string>{"vehicle", "tool"});
}

TEST_CASE("two-hypernym taxonomy gives a pool of size one") {
  auto t = generate_taxonomy(2, 3, 0.0, 5);
  const auto leaf = t.leaves()[0];
  CHECK(negative_pool(t, leaf, Level::hypernym).size() == 1);
}

TEST_CASE("leaf-level pool is all other leaves") {
  auto t = generate_taxonomy(4, 5, 0.2, 9);
  const auto leaf = t.leaves()[3];
  auto pool = negative_pool(t, leaf, Level::leaf);
  CHECK(pool.size() == t.members.size() - 1);
  CHECK(std::find(pool.begin(), pool.end(), leaf) == pool.end());
}

TEST_CASE("negative pool property over random taxonomies") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto t = generate_taxonomy(2 + seed % 6, 2 + seed % 4, 0.5, seed);
    for (const auto& [leaf, hs] : t.members) {
      if (hs.size() == t.hypernyms.size()) {
        // Leaf belongs to every hypernym: the pool is empty by definition.
        CHECK_THROWS(negative_pool(t, leaf, Level::hypernym));
        continue;
      }
      auto pool = negative_pool(t, leaf, Level::hypernym);
      for (const auto& hy : hs)
        CHECK(std::find(pool.begin(), pool.end(), hy) == pool.end());
      CHECK(pool.size() == t.hypernyms.size() - hs.size());
    }
  }
}

TEST_CASE("annotation CSV loader normalizes multi-word names") {
  auto p = temp_file("annot.csv");
  taxlab::write_text_file(p,
                          "leaf,hypernym\n"
                          "koala,mammal\n"
                          "koala,animal\n"
                          "stapler,school supply\n");
  auto t = load_annotation_csv(p.string());
  CHECK(t.is_leaf("koala"));
  CHECK(t.is_hypernym("school_supply"));
  CHECK(t.hypernyms_of("koala") == std::vector<std::string>{"animal", "mammal"});
}
