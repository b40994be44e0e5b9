#include "ltml/distill.hpp"

#include <algorithm>
#include <cmath>

#include "ltml/error.hpp"

namespace ltml {

namespace {
constexpr double kNormEps = 1e-12;
constexpr double kProbClamp = 1e-7;
}  // namespace

void KdConfig::validate() const {
  if (alpha < 0.0 || alpha > 0.5 || beta < 0.0 || beta > 0.5) {
    throw Error("kd: alpha and beta must lie in [0, 0.5]");
  }
  if (alpha + beta > 1.0) throw Error("kd: alpha + beta must be <= 1");
  if (gamma <= 0.0) throw Error("kd: gamma must be positive");
  if (temperature <= 0.0) throw Error("kd: temperature must be positive");
}

KdResult feature_kd(const Eigen::MatrixXd& v_teacher, const Eigen::MatrixXd& v_student) {
  if (v_teacher.rows() != v_student.rows() || v_teacher.cols() != v_student.cols()) {
    throw Error("feature-kd: embedding shape mismatch");
  }
  const Eigen::Index B = v_teacher.rows();
  KdResult r;
  r.dstudent = Eigen::MatrixXd::Zero(B, v_teacher.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    Eigen::VectorXd t = v_teacher.row(i).transpose();
    Eigen::VectorXd s = v_student.row(i).transpose();
    double nt = std::max(t.norm(), kNormEps);
    double ns = std::max(s.norm(), kNormEps);
    double c = t.dot(s) / (nt * ns);
    total += 1.0 - c;
    // d(1 - cos)/ds = -(t/(nt*ns) - cos * s/ns^2)
    Eigen::VectorXd g = -(t / (nt * ns) - c * s / (ns * ns));
    r.dstudent.row(i) = g.transpose() / static_cast<double>(B);
  }
  r.value = total / static_cast<double>(B);
  return r;
}

KdResult logits_kd(const Eigen::MatrixXd& z_student, const Eigen::MatrixXd& z_teacher,
                   double temperature, KlVariant variant) {
  if (z_student.rows() != z_teacher.rows() || z_student.cols() != z_teacher.cols()) {
    throw Error("logits-kd: shape mismatch");
  }
  if (temperature <= 0.0) throw Error("logits-kd: non-positive temperature");
  const Eigen::Index B = z_student.rows();
  const Eigen::Index k = z_student.cols();
  const double norm = 1.0 / (static_cast<double>(B) * static_cast<double>(k));
  KdResult r;
  r.dstudent = Eigen::MatrixXd::Zero(B, k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double ps_raw = 1.0 / (1.0 + std::exp(-z_student(i, j) / temperature));
      double pt_raw = 1.0 / (1.0 + std::exp(-z_teacher(i, j) / temperature));
      double ps = std::clamp(ps_raw, kProbClamp, 1.0 - kProbClamp);
      double pt = std::clamp(pt_raw, kProbClamp, 1.0 - kProbClamp);
      double term, dterm_dps;
      if (variant == KlVariant::full_binary) {
        term = pt * std::log(pt / ps) + (1.0 - pt) * std::log((1.0 - pt) / (1.0 - ps));
        dterm_dps = -pt / ps + (1.0 - pt) / (1.0 - ps);
      } else {
        term = pt * std::log(pt / ps);
        dterm_dps = -pt / ps;
      }
      total += term;
      // Clamped probabilities are locally constant in the student logit.
      if (ps_raw > kProbClamp && ps_raw < 1.0 - kProbClamp) {
        double dps_dz = ps_raw * (1.0 - ps_raw) / temperature;
        r.dstudent(i, j) = dterm_dps * dps_dz * norm;
      }
    }
  }
  r.value = total * norm;
  return r;
}

double total_loss(double l_bce, double l_fkd, double l_ckd, const KdConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(l_bce) || !std::isfinite(l_fkd) || !std::isfinite(l_ckd)) {
    throw Error("kd: non-finite loss component");
  }
  return (1.0 - cfg.alpha - cfg.beta) * l_bce + cfg.alpha * (cfg.gamma * l_fkd) +
         cfg.beta * l_ckd;
}

}  // namespace ltml
