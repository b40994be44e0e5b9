#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ltml/hierarchy.hpp"

namespace ltml {

enum class Split { train, val, test };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

// Row-major n x k binary label matrix.
struct LabelMatrix {
  Eigen::Index n = 0;
  Eigen::Index k = 0;
  std::vector<std::uint8_t> data;  // size n*k

  static LabelMatrix zeros(Eigen::Index n, Eigen::Index k) {
    return LabelMatrix{n, k, std::vector<std::uint8_t>(static_cast<std::size_t>(n * k), 0)};
  }
  std::uint8_t operator()(Eigen::Index i, Eigen::Index j) const {
    return data[static_cast<std::size_t>(i * k + j)];
  }
  std::uint8_t& at(Eigen::Index i, Eigen::Index j) {
    return data[static_cast<std::size_t>(i * k + j)];
  }
  std::vector<std::uint8_t> row(Eigen::Index i) const {
    return {data.begin() + i * k, data.begin() + (i + 1) * k};
  }
  std::vector<long> column_counts() const;
};

struct MultiLabelDataset {
  Eigen::MatrixXf features;        // n x d
  LabelMatrix labels;              // n x k
  std::vector<long> class_counts;  // column sums, recomputed on load
  Split split = Split::train;
  std::uint64_t seed = 0;

  Eigen::Index n() const { return labels.n; }
  Eigen::Index k() const { return labels.k; }
  Eigen::Index d() const { return features.cols(); }
};

struct DatasetStats {
  double rho = 0.0;    // max class count / min class count
  double lcard = 0.0;  // mean labels per sample
  std::vector<int> sorted_class_order;  // class ids by decreasing count
};

DatasetStats compute_stats(const LabelMatrix& labels);

enum class ShotGroup { many, medium, few };
std::string group_name(ShotGroup g);

struct GroupAssignment {
  std::vector<ShotGroup> group_of_class;
  long t_many = 100;
  long t_few = 10;
};

// count >= t_many -> many; t_few <= count < t_many -> medium; count < t_few -> few.
GroupAssignment assign_groups(const std::vector<long>& class_counts, long t_many,
                              long t_few);

struct SynthConfig {
  Eigen::Index n = 6000;
  Eigen::Index k = 24;
  Eigen::Index d = 32;
  double target_rho = 100.0;
  double cooccur_rate = 0.3;   // probability of one extra co-occurring label
  HierarchyTree tree;
  std::uint64_t seed = 42;
  double noise_sigma = 1.0;
};

struct DatasetTriple {
  MultiLabelDataset train, val, test;
};

// Long-tailed multi-label generator: geometric class-count decay toward
// target_rho, co-occurring labels biased to sibling classes, features drawn
// as hierarchical Gaussian prototypes plus isotropic noise. Deterministic in
// the seed; splits are stratified so every class appears in each split.
DatasetTriple generate_synthetic(const SynthConfig& cfg);

// The seeded leaf prototypes used by generate_synthetic (k x d). Exposed so
// tests can check the hierarchical geometry of the feature space.
Eigen::MatrixXd synthetic_prototypes(const SynthConfig& cfg);

void save_dataset(const MultiLabelDataset& ds, const std::filesystem::path& dir);
MultiLabelDataset load_dataset(const std::filesystem::path& dir);

// Triple layout: dir/train, dir/val, dir/test (+ dir/hierarchy.json when the
// generator writes it).
void save_triple(const DatasetTriple& t, const std::filesystem::path& dir);
DatasetTriple load_triple(const std::filesystem::path& dir);

}  // namespace ltml
