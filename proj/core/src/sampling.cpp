#include "ltml/sampling.hpp"

#include <cmath>
#include <sstream>

#include "ltml/error.hpp"

namespace ltml {

DeltaWeights compute_delta(const LabelMatrix& labels) {
  const Eigen::Index n = labels.n;
  const Eigen::Index k = labels.k;
  auto counts = labels.column_counts();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (counts[static_cast<std::size_t>(j)] == 0) {
      throw Error("delta: class " + std::to_string(j) + " has zero count");
    }
  }
  Eigen::VectorXd p_ideal(k);  // (1/k) / N_{c_j}
  for (Eigen::Index j = 0; j < k; ++j) {
    p_ideal[j] = 1.0 / (static_cast<double>(k) *
                        static_cast<double>(counts[static_cast<std::size_t>(j)]));
  }
  DeltaWeights w;
  w.delta.resize(n, k);
  w.sqrt_delta.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p_actual = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (labels(i, j)) p_actual += p_ideal[j];
    }
    if (p_actual <= 0.0) {
      throw Error("delta: row " + std::to_string(i) + " has no positive label");
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      double d = p_ideal[j] / p_actual;
      if (!labels(i, j) && d > 1.0) d = 1.0;
      w.delta(i, j) = d;
      w.sqrt_delta(i, j) = std::sqrt(d);
    }
  }
  return w;
}

BatchSampler::BatchSampler(const SamplerSpec& spec, const LabelMatrix& labels)
    : spec_(spec), n_(labels.n), rng_(spec.seed) {
  if (spec.batch_size < 1) throw Error("sampler: batch_size must be >= 1");
  if (labels.n < 1) throw Error("sampler: empty label matrix");
  rows_of_class_.resize(static_cast<std::size_t>(labels.k));
  for (Eigen::Index i = 0; i < labels.n; ++i) {
    for (Eigen::Index j = 0; j < labels.k; ++j) {
      if (labels(i, j)) rows_of_class_[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  if (spec.kind == SamplerKind::class_balanced) {
    for (std::size_t j = 0; j < rows_of_class_.size(); ++j) {
      if (rows_of_class_[j].empty()) {
        throw Error("sampler: class " + std::to_string(j) +
                    " has no positive rows; class-balanced draw undefined");
      }
    }
  }
}

std::vector<Eigen::Index> BatchSampler::draw_batch() {
  std::vector<Eigen::Index> batch;
  batch.reserve(static_cast<std::size_t>(spec_.batch_size));
  for (int t = 0; t < spec_.batch_size; ++t) {
    if (spec_.kind == SamplerKind::instance_balanced) {
      batch.push_back(static_cast<Eigen::Index>(rng_.below(static_cast<std::uint64_t>(n_))));
    } else {
      const auto& rows = rows_of_class_[rng_.below(rows_of_class_.size())];
      batch.push_back(rows[rng_.below(rows.size())]);
    }
  }
  return batch;
}

std::vector<double> simulate_exposure(const SamplerSpec& spec, const LabelMatrix& labels,
                                      long draws) {
  if (draws < 1) throw Error("exposure: draws must be >= 1");
  SamplerSpec one = spec;
  one.batch_size = 1;
  BatchSampler sampler(one, labels);
  std::vector<double> exposure(static_cast<std::size_t>(labels.k), 0.0);
  for (long t = 0; t < draws; ++t) {
    Eigen::Index i = sampler.draw_batch()[0];
    for (Eigen::Index j = 0; j < labels.k; ++j) {
      if (labels(i, j)) exposure[static_cast<std::size_t>(j)] += 1.0;
    }
  }
  return exposure;
}

std::string exposure_csv(const std::vector<double>& exposure, long draws) {
  std::ostringstream os;
  os << "class_id,exposure,exposure_per_draw\n";
  for (std::size_t j = 0; j < exposure.size(); ++j) {
    os << j << ',' << exposure[j] << ',' << exposure[j] / static_cast<double>(draws)
       << '\n';
  }
  return os.str();
}

}  // namespace ltml
