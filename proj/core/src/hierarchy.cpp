#include "ltml/hierarchy.hpp"

#include <algorithm>
#include <set>

#include "ltml/error.hpp"
#include "json.hpp"

namespace ltml {

using nlohmann::json;

HierarchyTree HierarchyTree::parse(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("hierarchy: malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("levels") || !j.contains("nodes")) {
    throw Error("hierarchy: expected object with 'levels' and 'nodes'");
  }
  int levels = j.at("levels").get<int>();
  std::vector<HierarchyNode> nodes;
  for (const auto& jn : j.at("nodes")) {
    HierarchyNode n;
    n.id = jn.at("id").get<int>();
    n.name = jn.value("name", std::string{});
    n.level = jn.at("level").get<int>();
    if (jn.contains("parents")) {
      for (const auto& p : jn.at("parents")) n.parents.push_back(p.get<int>());
    }
    nodes.push_back(std::move(n));
  }
  return build(levels, std::move(nodes));
}

HierarchyTree HierarchyTree::build(int levels, std::vector<HierarchyNode> nodes) {
  if (levels < 2) throw Error("hierarchy: levels must be >= 2");
  HierarchyTree t;
  t.levels_ = levels;
  for (auto& n : nodes) {
    if (n.level < 1 || n.level > levels) {
      throw Error("hierarchy: node " + std::to_string(n.id) + ": level " +
                  std::to_string(n.level) + " outside 1.." + std::to_string(levels));
    }
    if (!t.nodes_.emplace(n.id, n).second) {
      throw Error("hierarchy: duplicate id " + std::to_string(n.id));
    }
  }
  t.level_ids_.assign(levels, {});
  for (const auto& [id, n] : t.nodes_) t.level_ids_[n.level - 1].push_back(id);
  for (auto& ids : t.level_ids_) std::sort(ids.begin(), ids.end());
  for (int m = 1; m <= levels; ++m) {
    if (t.level_ids_[m - 1].empty()) {
      throw Error("hierarchy: no nodes at level " + std::to_string(m));
    }
  }

  // Leaves must be 0..k-1 in column order.
  t.leaf_count_ = static_cast<int>(t.level_ids_[0].size());
  for (int i = 0; i < t.leaf_count_; ++i) {
    if (t.level_ids_[0][i] != i) {
      throw Error("hierarchy: leaf ids must be 0..k-1; found id " +
                  std::to_string(t.level_ids_[0][i]));
    }
  }

  // Parent edges: present below level M, absent at level M, exactly one level up.
  for (const auto& [id, n] : t.nodes_) {
    if (n.level == levels) {
      if (!n.parents.empty()) {
        throw Error("hierarchy: node " + std::to_string(id) +
                    ": top-level node cannot have parents");
      }
      continue;
    }
    if (n.parents.empty()) {
      throw Error("hierarchy: node " + std::to_string(id) +
                  ": orphan (no parent below top level)");
    }
    for (int p : n.parents) {
      if (p == id) {
        throw Error("hierarchy: node " + std::to_string(id) + ": cycle (self parent)");
      }
      auto it = t.nodes_.find(p);
      if (it == t.nodes_.end()) {
        throw Error("hierarchy: node " + std::to_string(id) + ": unknown parent " +
                    std::to_string(p));
      }
      if (it->second.level != n.level + 1) {
        throw Error("hierarchy: node " + std::to_string(id) + ": parent " +
                    std::to_string(p) + " at wrong level");
      }
    }
  }

  // Descendant leaf sets, bottom-up. Level ordering makes cycles impossible
  // beyond the self-parent case rejected above.
  for (int id : t.level_ids_[0]) t.descendant_leaves_[id] = {id};
  for (int m = 2; m <= levels; ++m) {
    for (int id : t.level_ids_[m - 1]) t.descendant_leaves_[id] = {};
  }
  for (int m = 1; m < levels; ++m) {
    for (int id : t.level_ids_[m - 1]) {
      const auto& leaves = t.descendant_leaves_.at(id);
      for (int p : t.nodes_.at(id).parents) {
        auto& dst = t.descendant_leaves_.at(p);
        dst.insert(dst.end(), leaves.begin(), leaves.end());
      }
    }
    for (int id : t.level_ids_[m]) {
      auto& v = t.descendant_leaves_.at(id);
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      if (v.empty()) {
        throw Error("hierarchy: node " + std::to_string(id) + ": no descendant leaves");
      }
    }
  }

  // Every leaf must reach the top level.
  std::set<int> covered;
  for (int id : t.level_ids_[levels - 1]) {
    const auto& leaves = t.descendant_leaves_.at(id);
    covered.insert(leaves.begin(), leaves.end());
  }
  for (int leaf = 0; leaf < t.leaf_count_; ++leaf) {
    if (!covered.count(leaf)) {
      throw Error("hierarchy: leaf " + std::to_string(leaf) +
                  ": unreachable from top level");
    }
  }
  return t;
}

HierarchyTree HierarchyTree::balanced(int leaf_count, int levels, int fanout) {
  if (leaf_count < 2 || fanout < 1 || (levels != 2 && levels != 3)) {
    throw Error("hierarchy: balanced() wants k >= 2, fanout >= 1, levels in {2,3}");
  }
  std::vector<HierarchyNode> nodes;
  int next_id = leaf_count;
  int mid_count = (leaf_count + fanout - 1) / fanout;
  for (int i = 0; i < leaf_count; ++i) {
    HierarchyNode n;
    n.id = i;
    n.name = "leaf" + std::to_string(i);
    n.level = 1;
    n.parents = {leaf_count + i / fanout};
    nodes.push_back(std::move(n));
  }
  if (levels == 2) {
    for (int i = 0; i < mid_count; ++i) {
      HierarchyNode n;
      n.id = next_id++;
      n.name = "top" + std::to_string(i);
      n.level = 2;
      nodes.push_back(std::move(n));
    }
    return build(2, std::move(nodes));
  }
  int top_count = (mid_count + fanout - 1) / fanout;
  for (int i = 0; i < mid_count; ++i) {
    HierarchyNode n;
    n.id = next_id++;
    n.name = "mid" + std::to_string(i);
    n.level = 2;
    n.parents = {leaf_count + mid_count + i / fanout};
    nodes.push_back(std::move(n));
  }
  for (int i = 0; i < top_count; ++i) {
    HierarchyNode n;
    n.id = next_id++;
    n.name = "top" + std::to_string(i);
    n.level = 3;
    nodes.push_back(std::move(n));
  }
  return build(3, std::move(nodes));
}

const HierarchyNode& HierarchyTree::node(int id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error("hierarchy: unknown node id " + std::to_string(id));
  return it->second;
}

const std::vector<int>& HierarchyTree::nodes_at_level(int level) const {
  if (level < 1 || level > levels_) {
    throw Error("hierarchy: level " + std::to_string(level) + " out of range");
  }
  return level_ids_[level - 1];
}

const std::vector<int>& HierarchyTree::descendant_leaves(int node_id) const {
  auto it = descendant_leaves_.find(node_id);
  if (it == descendant_leaves_.end()) {
    throw Error("hierarchy: unknown node id " + std::to_string(node_id));
  }
  return it->second;
}

std::vector<std::vector<std::uint8_t>> HierarchyTree::derive_level_labels(
    const std::vector<std::uint8_t>& leaf_labels) const {
  if (static_cast<int>(leaf_labels.size()) != leaf_count_) {
    throw Error("hierarchy: leaf label length " + std::to_string(leaf_labels.size()) +
                " != leaf count " + std::to_string(leaf_count_));
  }
  std::vector<std::vector<std::uint8_t>> out;
  for (int m = 2; m <= levels_; ++m) {
    const auto& ids = level_ids_[m - 1];
    std::vector<std::uint8_t> lv(ids.size(), 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (int leaf : descendant_leaves_.at(ids[i])) {
        if (leaf_labels[leaf]) {
          lv[i] = 1;
          break;
        }
      }
    }
    out.push_back(std::move(lv));
  }
  return out;
}

std::string HierarchyTree::to_json() const {
  json j;
  j["levels"] = levels_;
  j["nodes"] = json::array();
  for (const auto& [id, n] : nodes_) {
    json jn;
    jn["id"] = n.id;
    jn["name"] = n.name;
    jn["level"] = n.level;
    jn["parents"] = n.parents;
    j["nodes"].push_back(std::move(jn));
  }
  return j.dump(2);
}

}  // namespace ltml
