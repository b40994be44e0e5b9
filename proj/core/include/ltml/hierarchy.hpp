#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ltml {

struct HierarchyNode {
  int id = -1;
  std::string name;
  int level = 0;                 // 1 = finest (leaves), M = coarsest
  std::vector<int> parents;      // node ids one level above; empty only at level M
};

// Immutable M-level label DAG. Leaves carry ids 0..k-1 matching the dataset's
// label-column order. A leaf may have multiple parents; in that case it is a
// descendant of each parent independently.
class HierarchyTree {
 public:
  // Parses and validates the JSON hierarchy format:
  //   {"levels": M, "nodes": [{"id", "name", "level", "parents": [...]}]}
  static HierarchyTree parse(const std::string& json_text);

  // Builds a tree from already-decoded nodes. Validates all invariants.
  static HierarchyTree build(int levels, std::vector<HierarchyNode> nodes);

  // Balanced synthetic tree: k leaves fanned into mid/top groups. Used by the
  // data generator and tests. levels must be 2 or 3.
  static HierarchyTree balanced(int leaf_count, int levels, int fanout);

  int levels() const { return levels_; }
  int leaf_count() const { return leaf_count_; }

  bool has_node(int id) const { return nodes_.count(id) != 0; }
  const HierarchyNode& node(int id) const;

  // Node ids at a level, ascending. Per-level classifier heads and derived
  // label vectors follow this order.
  const std::vector<int>& nodes_at_level(int level) const;

  // Leaf ids (level-1 descendants) of a node, ascending; a leaf maps to itself.
  const std::vector<int>& descendant_leaves(int node_id) const;

  // Parent-level labels from leaf labels: a node is positive iff any of its
  // descendant leaves is positive. Result[m-2] covers level m for m in 2..M,
  // ordered like nodes_at_level(m).
  std::vector<std::vector<std::uint8_t>> derive_level_labels(
      const std::vector<std::uint8_t>& leaf_labels) const;

  std::string to_json() const;

 private:
  int levels_ = 0;
  int leaf_count_ = 0;
  std::map<int, HierarchyNode> nodes_;
  std::vector<std::vector<int>> level_ids_;             // index 0 -> level 1
  std::map<int, std::vector<int>> descendant_leaves_;
};

}  // namespace ltml
