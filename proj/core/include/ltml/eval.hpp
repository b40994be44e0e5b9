#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ltml/dataset.hpp"
#include "ltml/model.hpp"

namespace ltml {

struct EvalReport {
  std::vector<double> per_class_ap;  // NaN for skipped classes
  double map_many = 0.0;
  double map_medium = 0.0;
  double map_few = 0.0;
  double average = 0.0;        // unweighted mean of the nonempty group mAPs
  double all_class_map = 0.0;  // mean AP over all scored classes
  std::vector<int> skipped_classes;

  double group(ShotGroup g) const {
    switch (g) {
      case ShotGroup::many: return map_many;
      case ShotGroup::medium: return map_medium;
      case ShotGroup::few: return map_few;
    }
    return 0.0;
  }
};

struct AggregateReport {
  EvalReport mean;
  EvalReport stddev;  // sample std, n-1 denominator
  int trials = 0;
};

// Rank-based AP: stable descending sort on score (ties by ascending original
// index), AP = (1/P) * sum over positives of precision at their rank.
double average_precision(const std::vector<double>& scores,
                         const std::vector<std::uint8_t>& labels);

// Scores every sample with sigmoid(leaf logits) and aggregates per-class AP
// into group mAPs. Classes without positives in the split are skipped and
// excluded from their group's mean.
EvalReport evaluate(const ModelBundle& model, const MultiLabelDataset& ds,
                    const GroupAssignment& groups);

AggregateReport aggregate_trials(const std::vector<EvalReport>& reports);

// CSV of per-class AP increments (b - a), rows sorted by descending class
// count. Header: class_id,group,delta_ap.
std::string ap_delta_report_csv(const EvalReport& a, const EvalReport& b,
                                const GroupAssignment& groups,
                                const std::vector<long>& class_counts);

std::string report_to_json(const EvalReport& r);
std::string aggregate_to_json(const AggregateReport& r);
void write_report(const EvalReport& r, const std::filesystem::path& path);
EvalReport report_from_json(const std::string& text);

}  // namespace ltml
