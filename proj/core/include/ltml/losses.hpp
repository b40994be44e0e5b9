#pragma once

#include <Eigen/Core>
#include <vector>

#include "ltml/hierarchy.hpp"

namespace ltml {

struct LossResult {
  double value = 0.0;
  Eigen::MatrixXd dlogits;               // batch x k, gradient w.r.t. leaf logits
  std::vector<double> per_level_values;  // filled by the hierarchical losses
};

// Mean binary cross-entropy over all (sample, class) cells, optionally with a
// nonnegative per-cell weight. Computed from logits in softplus form, so the
// value stays finite for any finite input.
//   value = (1/(kB)) sum w_ij * [softplus(z_ij) - y_ij * z_ij]
//   dlogits = w_ij * (sigmoid(z_ij) - y_ij) / (kB)
LossResult bce_multilabel(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y,
                          const Eigen::MatrixXd* weights = nullptr);

// Hierarchical marginalization loss. The leaf level is plain BCE on the leaf
// logits; at each coarser level a node's logit is the sum of its descendant
// leaves' logits (each leaf counted once), its label the OR of theirs, and the
// level contributes its own BCE normalized by 1/(k_m * B). Gradients from every
// level accumulate onto the leaf logits.
// leaf_weights, when given, weight the leaf-level term; with weight_parents a
// parent cell's weight is the mean of its descendant leaves' weights.
LossResult mlmc_loss(const Eigen::MatrixXd& Z_leaf, const Eigen::MatrixXd& Y_leaf,
                     const HierarchyTree& tree,
                     const Eigen::MatrixXd* leaf_weights = nullptr,
                     bool weight_parents = false);

// Per-level classifier baseline: independent logit heads per level, each
// penalized with BCE against the derived labels; no coupling across levels.
struct PerLevelLossResult {
  double value = 0.0;
  std::vector<Eigen::MatrixXd> dlogits_per_level;
  std::vector<double> per_level_values;
};

PerLevelLossResult per_level_loss(const std::vector<Eigen::MatrixXd>& Z_levels,
                                  const Eigen::MatrixXd& Y_leaf,
                                  const HierarchyTree& tree);

enum class DeltaTransform {
  sqrt_form,   // weight = sqrt(delta), the default re-balancing
  square_form  // weight = delta^2, the literal "square" variant
};

// BCE weighted by the transformed re-balancing factors for the batch rows.
LossResult ics_bce(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y,
                   const Eigen::MatrixXd& delta_rows,
                   DeltaTransform transform = DeltaTransform::sqrt_form);

Eigen::MatrixXd transform_delta(const Eigen::MatrixXd& delta_rows,
                                DeltaTransform transform);

}  // namespace ltml
