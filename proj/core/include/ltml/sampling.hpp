#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ltml/dataset.hpp"
#include "ltml/rng.hpp"

namespace ltml {

// Instance-wise class-balanced re-weighting factors. For sample i and class j,
//   p_i^j  = (1/k) / N_{c_j}
//   p_i^A  = sum over the sample's positive classes of p_i^j
//   delta  = p_i^j / p_i^A, clamped to 1 from above on negative entries
// so every entry lies in (0, 1]. sqrt_delta is the loss multiplier.
struct DeltaWeights {
  Eigen::MatrixXd delta;       // n x k
  Eigen::MatrixXd sqrt_delta;  // elementwise sqrt
};

DeltaWeights compute_delta(const LabelMatrix& labels);

enum class SamplerKind { instance_balanced, class_balanced };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::instance_balanced;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

// Single-owner batch sampler. instance_balanced draws rows uniformly;
// class_balanced draws a class uniformly, then a row uniformly among that
// class's positives.
class BatchSampler {
 public:
  BatchSampler(const SamplerSpec& spec, const LabelMatrix& labels);

  std::vector<Eigen::Index> draw_batch();

 private:
  SamplerSpec spec_;
  Eigen::Index n_;
  std::vector<std::vector<Eigen::Index>> rows_of_class_;
  Rng rng_;
};

// Monte-Carlo estimate of per-class positive exposure: how many times each
// class appears as a positive label of a drawn sample over `draws` draws.
std::vector<double> simulate_exposure(const SamplerSpec& spec, const LabelMatrix& labels,
                                      long draws);

std::string exposure_csv(const std::vector<double>& exposure, long draws);

}  // namespace ltml
