#pragma once

#include <Eigen/Core>

namespace ltml {

enum class KlVariant {
  full_binary,  // two-term binary KL per class, nonnegative
  literal       // one-term p_t * ln(p_t/p_s); can go negative
};

struct KdConfig {
  double alpha = 0.2;
  double beta = 0.2;
  double gamma = 10.0;
  double temperature = 3.0;
  KlVariant kl_variant = KlVariant::full_binary;

  void validate() const;
};

struct KdResult {
  double value = 0.0;
  Eigen::MatrixXd dstudent;  // gradient w.r.t. the student tensor only
};

// Mean cosine distance 1 - cos(v_t, v_s) over the batch; gradients flow into
// the student embeddings only. Norms stabilized with eps = 1e-12.
KdResult feature_kd(const Eigen::MatrixXd& v_teacher, const Eigen::MatrixXd& v_student);

// Temperature-scaled per-class divergence between sigmoid outputs,
// p = sigmoid(z / T), probabilities clamped to [1e-7, 1 - 1e-7] before logs.
KdResult logits_kd(const Eigen::MatrixXd& z_student, const Eigen::MatrixXd& z_teacher,
                   double temperature, KlVariant variant);

// L_total = (1 - alpha - beta) * l_bce + alpha * (gamma * l_fkd) + beta * l_ckd.
double total_loss(double l_bce, double l_fkd, double l_ckd, const KdConfig& cfg);

}  // namespace ltml
