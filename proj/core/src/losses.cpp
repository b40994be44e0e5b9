#include "ltml/losses.hpp"

#include <cmath>

#include "ltml/error.hpp"

namespace ltml {

namespace {

inline double softplus(double z) {
  return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Derived parent labels / weights for one level, given leaf matrices.
Eigen::MatrixXd or_reduce(const Eigen::MatrixXd& Y_leaf, const HierarchyTree& tree,
                          int level) {
  const auto& ids = tree.nodes_at_level(level);
  Eigen::MatrixXd Y(Y_leaf.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t c = 0; c < ids.size(); ++c) {
    const auto& leaves = tree.descendant_leaves(ids[c]);
    for (Eigen::Index i = 0; i < Y_leaf.rows(); ++i) {
      double v = 0.0;
      for (int leaf : leaves) {
        if (Y_leaf(i, leaf) != 0.0) {
          v = 1.0;
          break;
        }
      }
      Y(i, static_cast<Eigen::Index>(c)) = v;
    }
  }
  return Y;
}

}  // namespace

LossResult bce_multilabel(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y,
                          const Eigen::MatrixXd* weights) {
  if (Z.rows() != Y.rows() || Z.cols() != Y.cols()) {
    throw Error("bce: logits/labels shape mismatch");
  }
  if (weights) {
    if (weights->rows() != Z.rows() || weights->cols() != Z.cols()) {
      throw Error("bce: weight shape mismatch");
    }
    if ((weights->array() < 0.0).any()) throw Error("bce: negative weight");
  }
  const double norm = 1.0 / (static_cast<double>(Z.rows()) * static_cast<double>(Z.cols()));
  LossResult r;
  r.dlogits.resize(Z.rows(), Z.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      double w = weights ? (*weights)(i, j) : 1.0;
      double z = Z(i, j);
      double y = Y(i, j);
      total += w * (softplus(z) - y * z);
      r.dlogits(i, j) = w * (sigmoid(z) - y) * norm;
    }
  }
  r.value = total * norm;
  return r;
}

LossResult mlmc_loss(const Eigen::MatrixXd& Z_leaf, const Eigen::MatrixXd& Y_leaf,
                     const HierarchyTree& tree, const Eigen::MatrixXd* leaf_weights,
                     bool weight_parents) {
  if (Z_leaf.cols() != tree.leaf_count()) {
    throw Error("mlmc: logit width != tree leaf count");
  }
  LossResult leaf = bce_multilabel(Z_leaf, Y_leaf, leaf_weights);
  LossResult r;
  r.value = leaf.value;
  r.dlogits = leaf.dlogits;
  r.per_level_values.push_back(leaf.value);

  for (int m = 2; m <= tree.levels(); ++m) {
    const auto& ids = tree.nodes_at_level(m);
    const Eigen::Index km = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd P(Z_leaf.rows(), km);
    for (Eigen::Index c = 0; c < km; ++c) {
      const auto& leaves = tree.descendant_leaves(ids[static_cast<std::size_t>(c)]);
      P.col(c).setZero();
      for (int leaf_id : leaves) P.col(c) += Z_leaf.col(leaf_id);
    }
    Eigen::MatrixXd Ym = or_reduce(Y_leaf, tree, m);
    Eigen::MatrixXd Wm;
    const Eigen::MatrixXd* wptr = nullptr;
    if (leaf_weights && weight_parents) {
      Wm.resize(Z_leaf.rows(), km);
      for (Eigen::Index c = 0; c < km; ++c) {
        const auto& leaves = tree.descendant_leaves(ids[static_cast<std::size_t>(c)]);
        Wm.col(c).setZero();
        for (int leaf_id : leaves) Wm.col(c) += leaf_weights->col(leaf_id);
        Wm.col(c) /= static_cast<double>(leaves.size());
      }
      wptr = &Wm;
    }
    LossResult lvl = bce_multilabel(P, Ym, wptr);
    r.value += lvl.value;
    r.per_level_values.push_back(lvl.value);
    for (Eigen::Index c = 0; c < km; ++c) {
      const auto& leaves = tree.descendant_leaves(ids[static_cast<std::size_t>(c)]);
      for (int leaf_id : leaves) r.dlogits.col(leaf_id) += lvl.dlogits.col(c);
    }
  }
  return r;
}

PerLevelLossResult per_level_loss(const std::vector<Eigen::MatrixXd>& Z_levels,
                                  const Eigen::MatrixXd& Y_leaf,
                                  const HierarchyTree& tree) {
  if (static_cast<int>(Z_levels.size()) != tree.levels()) {
    throw Error("per-level: expected one logit matrix per level");
  }
  PerLevelLossResult r;
  for (int m = 1; m <= tree.levels(); ++m) {
    const auto& Z = Z_levels[static_cast<std::size_t>(m - 1)];
    const Eigen::Index km = static_cast<Eigen::Index>(tree.nodes_at_level(m).size());
    if (Z.cols() != km) {
      throw Error("per-level: level " + std::to_string(m) + " width " +
                  std::to_string(Z.cols()) + " != node count " + std::to_string(km));
    }
    Eigen::MatrixXd Ym = (m == 1) ? Y_leaf : or_reduce(Y_leaf, tree, m);
    LossResult lvl = bce_multilabel(Z, Ym);
    r.value += lvl.value;
    r.per_level_values.push_back(lvl.value);
    r.dlogits_per_level.push_back(std::move(lvl.dlogits));
  }
  return r;
}

Eigen::MatrixXd transform_delta(const Eigen::MatrixXd& delta_rows,
                                DeltaTransform transform) {
  if (transform == DeltaTransform::sqrt_form) return delta_rows.cwiseSqrt();
  return delta_rows.cwiseProduct(delta_rows);
}

LossResult ics_bce(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y,
                   const Eigen::MatrixXd& delta_rows, DeltaTransform transform) {
  if (delta_rows.rows() != Z.rows() || delta_rows.cols() != Z.cols()) {
    throw Error("ics: delta rows misaligned with batch");
  }
  Eigen::MatrixXd w = transform_delta(delta_rows, transform);
  return bce_multilabel(Z, Y, &w);
}

}  // namespace ltml
