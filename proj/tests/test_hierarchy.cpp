#include "doctest.h"
#include "ltml/error.hpp"
#include "ltml/hierarchy.hpp"
#include "test_util.hpp"

using namespace ltml;

namespace {

// 3-level, 8-leaf fixture: leaves 0..7, mids 8..11 (two leaves each),
// tops 12..13 (two mids each).
HierarchyTree eight_leaf_fixture() {
  std::vector<HierarchyNode> nodes;
  for (int i = 0; i < 8; ++i) nodes.push_back({i, "leaf", 1, {8 + i / 2}});
  for (int i = 0; i < 4; ++i) nodes.push_back({8 + i, "mid", 2, {12 + i / 2}});
  for (int i = 0; i < 2; ++i) nodes.push_back({12 + i, "top", 3, {}});
  return HierarchyTree::build(3, std::move(nodes));
}

}  // namespace

TEST_CASE("parse minimal 2-level tree") {
  const char* text = R"({
    "levels": 2,
    "nodes": [
      {"id": 0, "name": "A", "level": 1, "parents": [2]},
      {"id": 1, "name": "B", "level": 1, "parents": [2]},
      {"id": 2, "name": "P", "level": 2}
    ]
  })";
  auto t = HierarchyTree::parse(text);
  CHECK(t.levels() == 2);
  CHECK(t.leaf_count() == 2);
  CHECK(t.descendant_leaves(2) == std::vector<int>{0, 1});
}

TEST_CASE("self-parent is a cycle error") {
  const char* text = R"({
    "levels": 2,
    "nodes": [
      {"id": 0, "level": 1, "parents": [0]},
      {"id": 1, "level": 2}
    ]
  })";
  CHECK_THROWS_WITH_AS(HierarchyTree::parse(text), doctest::Contains("cycle"), Error);
}

TEST_CASE("validation errors name the node") {
  SUBCASE("duplicate id") {
    std::vector<HierarchyNode> nodes = {{0, "", 1, {1}}, {0, "", 1, {1}}, {1, "", 2, {}}};
    CHECK_THROWS_WITH_AS(HierarchyTree::build(2, std::move(nodes)),
                         doctest::Contains("duplicate"), Error);
  }
  SUBCASE("parent at wrong level") {
    std::vector<HierarchyNode> nodes = {
        {0, "", 1, {1}}, {1, "", 1, {2}}, {2, "", 2, {}}};
    CHECK_THROWS_WITH_AS(HierarchyTree::build(2, std::move(nodes)),
                         doctest::Contains("wrong level"), Error);
  }
  SUBCASE("orphan below top level") {
    std::vector<HierarchyNode> nodes = {{0, "", 1, {2}}, {1, "", 1, {}}, {2, "", 2, {}}};
    CHECK_THROWS_WITH_AS(HierarchyTree::build(2, std::move(nodes)),
                         doctest::Contains("orphan"), Error);
  }
  SUBCASE("unknown parent") {
    std::vector<HierarchyNode> nodes = {{0, "", 1, {9}}, {1, "", 1, {2}}, {2, "", 2, {}}};
    CHECK_THROWS_WITH_AS(HierarchyTree::build(2, std::move(nodes)),
                         doctest::Contains("unknown parent"), Error);
  }
}

TEST_CASE("8-leaf fixture shape and descendants") {
  auto t = eight_leaf_fixture();
  CHECK(t.levels() == 3);
  CHECK(t.leaf_count() == 8);
  CHECK(t.nodes_at_level(2).size() == 4);
  CHECK(t.nodes_at_level(3).size() == 2);
  CHECK(t.descendant_leaves(0) == std::vector<int>{0});
  CHECK(t.descendant_leaves(12) == std::vector<int>{0, 1, 2, 3});
  CHECK(t.descendant_leaves(13) == std::vector<int>{4, 5, 6, 7});
}

TEST_CASE("diamond: multi-parent leaf is a descendant of both parents") {
  std::vector<HierarchyNode> nodes = {
      {0, "X", 1, {1, 2}}, {1, "P1", 2, {3}}, {2, "P2", 2, {3}}, {3, "R", 3, {}}};
  auto t = HierarchyTree::build(3, std::move(nodes));
  CHECK(t.descendant_leaves(1) == std::vector<int>{0});
  CHECK(t.descendant_leaves(2) == std::vector<int>{0});
  CHECK(t.descendant_leaves(3) == std::vector<int>{0});  // counted once
}

TEST_CASE("derive_level_labels") {
  auto t = eight_leaf_fixture();
  SUBCASE("all zero stays zero") {
    auto lv = t.derive_level_labels(std::vector<std::uint8_t>(8, 0));
    for (const auto& v : lv) {
      for (auto b : v) CHECK(b == 0);
    }
  }
  SUBCASE("single positive propagates along its path only") {
    std::vector<std::uint8_t> y(8, 0);
    y[0] = 1;
    auto lv = t.derive_level_labels(y);
    CHECK(lv[0] == std::vector<std::uint8_t>{1, 0, 0, 0});
    CHECK(lv[1] == std::vector<std::uint8_t>{1, 0});
  }
  SUBCASE("two positives under distinct mids share the top") {
    std::vector<std::uint8_t> y(8, 0);
    y[0] = 1;
    y[2] = 1;
    auto lv = t.derive_level_labels(y);
    CHECK(lv[0] == std::vector<std::uint8_t>{1, 1, 0, 0});
    CHECK(lv[1] == std::vector<std::uint8_t>{1, 0});
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(t.derive_level_labels(std::vector<std::uint8_t>(7, 0)), Error);
  }
}

TEST_CASE("descendant_leaves matches brute-force path enumeration on random trees") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto t = testutil::random_tree(rng);
    for (int m = 1; m <= t.levels(); ++m) {
      for (int id : t.nodes_at_level(m)) {
        CHECK(t.descendant_leaves(id) == testutil::brute_force_descendant_leaves(t, id));
      }
    }
    // OR-derivation agrees with per-node descendant OR.
    std::vector<std::uint8_t> y(static_cast<std::size_t>(t.leaf_count()));
    for (auto& b : y) b = rng.uniform() < 0.3 ? 1 : 0;
    auto lv = t.derive_level_labels(y);
    for (int m = 2; m <= t.levels(); ++m) {
      const auto& ids = t.nodes_at_level(m);
      for (std::size_t c = 0; c < ids.size(); ++c) {
        std::uint8_t expect = 0;
        for (int leaf : testutil::brute_force_descendant_leaves(t, ids[c])) {
          expect |= y[static_cast<std::size_t>(leaf)];
        }
        CHECK(lv[static_cast<std::size_t>(m - 2)][c] == expect);
      }
    }
  }
}

TEST_CASE("descendant queries stable under node reordering in the file") {
  const char* a = R"({"levels":2,"nodes":[
    {"id":0,"level":1,"parents":[2]},{"id":1,"level":1,"parents":[2]},{"id":2,"level":2}]})";
  const char* b = R"({"levels":2,"nodes":[
    {"id":2,"level":2},{"id":1,"level":1,"parents":[2]},{"id":0,"level":1,"parents":[2]}]})";
  auto ta = HierarchyTree::parse(a);
  auto tb = HierarchyTree::parse(b);
  CHECK(ta.descendant_leaves(2) == tb.descendant_leaves(2));
  CHECK(ta.descendant_leaves(2) == ta.descendant_leaves(2));  // idempotent re-query
}
