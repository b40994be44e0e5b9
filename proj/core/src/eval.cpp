#include "ltml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "ltml/error.hpp"
#include "json.hpp"

namespace ltml {

using nlohmann::json;

double average_precision(const std::vector<double>& scores,
                         const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error("ap: scores/labels size mismatch or empty");
  }
  long positives = std::accumulate(labels.begin(), labels.end(), 0L);
  if (positives == 0) throw Error("ap: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double sum = 0.0;
  long hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

EvalReport evaluate(const ModelBundle& model, const MultiLabelDataset& ds,
                    const GroupAssignment& groups) {
  if (ds.n() == 0) throw Error("eval: empty split");
  if (static_cast<Eigen::Index>(groups.group_of_class.size()) != ds.k()) {
    throw Error("eval: group assignment does not cover all classes");
  }
  auto [V, Z] = forward(model, ds.features.cast<double>());
  (void)V;

  EvalReport rep;
  rep.per_class_ap.assign(static_cast<std::size_t>(ds.k()),
                          std::numeric_limits<double>::quiet_NaN());
  double group_sum[3] = {0, 0, 0};
  long group_n[3] = {0, 0, 0};
  double all_sum = 0.0;
  long all_n = 0;
  for (Eigen::Index j = 0; j < ds.k(); ++j) {
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(ds.n()));
    long positives = 0;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      labels[static_cast<std::size_t>(i)] = ds.labels(i, j);
      positives += ds.labels(i, j);
    }
    if (positives == 0) {
      rep.skipped_classes.push_back(static_cast<int>(j));
      continue;
    }
    std::vector<double> scores(static_cast<std::size_t>(ds.n()));
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      scores[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-Z(i, j)));
    }
    double ap = average_precision(scores, labels);
    rep.per_class_ap[static_cast<std::size_t>(j)] = ap;
    int g = static_cast<int>(groups.group_of_class[static_cast<std::size_t>(j)]);
    group_sum[g] += ap;
    group_n[g] += 1;
    all_sum += ap;
    all_n += 1;
  }
  double avg_sum = 0.0;
  int avg_n = 0;
  double* slots[3] = {&rep.map_many, &rep.map_medium, &rep.map_few};
  for (int g = 0; g < 3; ++g) {
    if (group_n[g] > 0) {
      *slots[g] = group_sum[g] / static_cast<double>(group_n[g]);
      avg_sum += *slots[g];
      ++avg_n;
    }
  }
  rep.average = avg_n ? avg_sum / avg_n : 0.0;
  rep.all_class_map = all_n ? all_sum / all_n : 0.0;
  return rep;
}

namespace {

void accumulate(const std::vector<EvalReport>& reports,
                double (*get)(const EvalReport&), double* mean, double* sd) {
  double s = 0.0;
  for (const auto& r : reports) s += get(r);
  *mean = s / static_cast<double>(reports.size());
  double ss = 0.0;
  for (const auto& r : reports) {
    double d = get(r) - *mean;
    ss += d * d;
  }
  *sd = std::sqrt(ss / static_cast<double>(reports.size() - 1));
}

}  // namespace

AggregateReport aggregate_trials(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) throw Error("aggregate: need >= 2 reports");
  const std::size_t k = reports.front().per_class_ap.size();
  for (const auto& r : reports) {
    if (r.per_class_ap.size() != k || r.skipped_classes != reports.front().skipped_classes) {
      throw Error("aggregate: report structure mismatch");
    }
  }
  AggregateReport agg;
  agg.trials = static_cast<int>(reports.size());
  agg.mean.per_class_ap.assign(k, std::numeric_limits<double>::quiet_NaN());
  agg.stddev.per_class_ap.assign(k, std::numeric_limits<double>::quiet_NaN());
  agg.mean.skipped_classes = reports.front().skipped_classes;
  agg.stddev.skipped_classes = reports.front().skipped_classes;
  for (std::size_t j = 0; j < k; ++j) {
    if (std::isnan(reports.front().per_class_ap[j])) continue;
    double s = 0.0;
    for (const auto& r : reports) s += r.per_class_ap[j];
    double mean = s / static_cast<double>(reports.size());
    double ss = 0.0;
    for (const auto& r : reports) {
      double d = r.per_class_ap[j] - mean;
      ss += d * d;
    }
    agg.mean.per_class_ap[j] = mean;
    agg.stddev.per_class_ap[j] = std::sqrt(ss / static_cast<double>(reports.size() - 1));
  }
  accumulate(reports, [](const EvalReport& r) { return r.map_many; }, &agg.mean.map_many,
             &agg.stddev.map_many);
  accumulate(reports, [](const EvalReport& r) { return r.map_medium; },
             &agg.mean.map_medium, &agg.stddev.map_medium);
  accumulate(reports, [](const EvalReport& r) { return r.map_few; }, &agg.mean.map_few,
             &agg.stddev.map_few);
  accumulate(reports, [](const EvalReport& r) { return r.average; }, &agg.mean.average,
             &agg.stddev.average);
  accumulate(reports, [](const EvalReport& r) { return r.all_class_map; },
             &agg.mean.all_class_map, &agg.stddev.all_class_map);
  return agg;
}

std::string ap_delta_report_csv(const EvalReport& a, const EvalReport& b,
                                const GroupAssignment& groups,
                                const std::vector<long>& class_counts) {
  const std::size_t k = a.per_class_ap.size();
  if (b.per_class_ap.size() != k || groups.group_of_class.size() != k ||
      class_counts.size() != k) {
    throw Error("delta-report: class structure mismatch");
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return class_counts[x] > class_counts[y];
  });
  std::ostringstream os;
  os << "class_id,group,delta_ap\n";
  for (std::size_t j : order) {
    double da = b.per_class_ap[j] - a.per_class_ap[j];
    os << j << ',' << group_name(groups.group_of_class[j]) << ',';
    if (std::isnan(da)) {
      os << "skipped";
    } else {
      os << da;
    }
    os << '\n';
  }
  return os.str();
}

namespace {

json report_json(const EvalReport& r) {
  json j;
  j["per_class_ap"] = json::array();
  for (double ap : r.per_class_ap) {
    if (std::isnan(ap)) {
      j["per_class_ap"].push_back(nullptr);
    } else {
      j["per_class_ap"].push_back(ap);
    }
  }
  j["group_map"] = {{"many", r.map_many}, {"medium", r.map_medium}, {"few", r.map_few}};
  j["average"] = r.average;
  j["all_class_map"] = r.all_class_map;
  j["skipped_classes"] = r.skipped_classes;
  return j;
}

}  // namespace

std::string report_to_json(const EvalReport& r) { return report_json(r).dump(2); }

std::string aggregate_to_json(const AggregateReport& r) {
  json j;
  j["trials"] = r.trials;
  j["mean"] = report_json(r.mean);
  j["std"] = report_json(r.stddev);
  return j.dump(2);
}

void write_report(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("eval: cannot write " + path.string());
  os << report_to_json(r) << "\n";
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("eval: bad report JSON: " + std::string(e.what()));
  }
  EvalReport r;
  for (const auto& v : j.at("per_class_ap")) {
    r.per_class_ap.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                         : v.get<double>());
  }
  r.map_many = j.at("group_map").at("many").get<double>();
  r.map_medium = j.at("group_map").at("medium").get<double>();
  r.map_few = j.at("group_map").at("few").get<double>();
  r.average = j.at("average").get<double>();
  r.all_class_map = j.at("all_class_map").get<double>();
  for (const auto& v : j.at("skipped_classes")) r.skipped_classes.push_back(v.get<int>());
  return r;
}

}  // namespace ltml
