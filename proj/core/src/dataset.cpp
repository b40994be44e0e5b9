#include "ltml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ltml/error.hpp"
#include "ltml/rng.hpp"
#include "json.hpp"

namespace ltml {

using nlohmann::json;

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw Error("dataset: unknown split '" + name + "'");
}

std::string group_name(ShotGroup g) {
  switch (g) {
    case ShotGroup::many: return "many";
    case ShotGroup::medium: return "medium";
    case ShotGroup::few: return "few";
  }
  return "many";
}

std::vector<long> LabelMatrix::column_counts() const {
  std::vector<long> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      counts[static_cast<std::size_t>(j)] += (*this)(i, j);
    }
  }
  return counts;
}

DatasetStats compute_stats(const LabelMatrix& labels) {
  if (labels.n < 1 || labels.k < 2) throw Error("stats: labels must be n>=1, k>=2");
  auto counts = labels.column_counts();
  long total = 0;
  for (Eigen::Index j = 0; j < labels.k; ++j) {
    if (counts[static_cast<std::size_t>(j)] == 0) {
      throw Error("stats: class " + std::to_string(j) +
                  " has zero positives; imbalance ratio undefined");
    }
    total += counts[static_cast<std::size_t>(j)];
  }
  DatasetStats st;
  long cmax = *std::max_element(counts.begin(), counts.end());
  long cmin = *std::min_element(counts.begin(), counts.end());
  st.rho = static_cast<double>(cmax) / static_cast<double>(cmin);
  st.lcard = static_cast<double>(total) / static_cast<double>(labels.n);
  st.sorted_class_order.resize(static_cast<std::size_t>(labels.k));
  std::iota(st.sorted_class_order.begin(), st.sorted_class_order.end(), 0);
  std::stable_sort(st.sorted_class_order.begin(), st.sorted_class_order.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  return st;
}

GroupAssignment assign_groups(const std::vector<long>& class_counts, long t_many,
                              long t_few) {
  if (t_many <= t_few || t_few < 1) {
    throw Error("groups: need t_many > t_few >= 1, got (" + std::to_string(t_many) +
                ", " + std::to_string(t_few) + ")");
  }
  GroupAssignment g;
  g.t_many = t_many;
  g.t_few = t_few;
  for (long c : class_counts) {
    if (c >= t_many) {
      g.group_of_class.push_back(ShotGroup::many);
    } else if (c >= t_few) {
      g.group_of_class.push_back(ShotGroup::medium);
    } else {
      g.group_of_class.push_back(ShotGroup::few);
    }
  }
  return g;
}

namespace {

constexpr long kMinPerClass = 5;  // allows >=1 sample per class in every split

std::vector<long> geometric_counts(Eigen::Index n, Eigen::Index k, double rho) {
  double q = std::pow(rho, -1.0 / static_cast<double>(k - 1));
  double denom = (1.0 - std::pow(q, static_cast<double>(k))) / (1.0 - q);
  double c0 = static_cast<double>(n) / denom;
  std::vector<long> counts;
  long total = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    long c = std::max(kMinPerClass,
                      static_cast<long>(std::llround(c0 * std::pow(q, double(j)))));
    counts.push_back(c);
    total += c;
  }
  // Absorb the rounding residual in the head class.
  counts[0] += n - total;
  if (counts[0] < kMinPerClass) {
    throw Error("synth: infeasible config (n too small for k classes)");
  }
  return counts;
}

}  // namespace

Eigen::MatrixXd synthetic_prototypes(const SynthConfig& cfg) {
  const auto& tree = cfg.tree;
  Rng rng(cfg.seed ^ 0x70726f746fULL);
  const double top_scale = 3.0;
  const double mid_scale = 1.5;
  const double leaf_scale = 0.75;

  std::map<int, Eigen::VectorXd> proto;
  for (int m = tree.levels(); m >= 1; --m) {
    for (int id : tree.nodes_at_level(m)) {
      Eigen::VectorXd v(cfg.d);
      double scale = (m == tree.levels()) ? top_scale : (m == 1 ? leaf_scale : mid_scale);
      for (Eigen::Index t = 0; t < cfg.d; ++t) v[t] = scale * rng.normal();
      const auto& parents = tree.node(id).parents;
      if (!parents.empty()) v += proto.at(parents.front());
      proto[id] = std::move(v);
    }
  }
  Eigen::MatrixXd leaves(cfg.k, cfg.d);
  for (Eigen::Index j = 0; j < cfg.k; ++j) leaves.row(j) = proto.at(int(j)).transpose();
  return leaves;
}

DatasetTriple generate_synthetic(const SynthConfig& cfg) {
  if (cfg.k != cfg.tree.leaf_count()) {
    throw Error("synth: k != tree leaf count");
  }
  if (cfg.n < cfg.k * kMinPerClass) {
    throw Error("synth: infeasible config (k*min-count > n)");
  }
  if (cfg.target_rho < 1.0 || cfg.cooccur_rate < 0.0 || cfg.cooccur_rate >= 1.0 ||
      cfg.noise_sigma <= 0.0) {
    throw Error("synth: invalid config");
  }

  auto counts = geometric_counts(cfg.n, cfg.k, cfg.target_rho);
  Eigen::MatrixXd protos = synthetic_prototypes(cfg);

  // Sibling lists: leaves sharing a level-2 parent.
  std::vector<std::vector<int>> siblings(static_cast<std::size_t>(cfg.k));
  for (int j = 0; j < cfg.k; ++j) {
    for (int p : cfg.tree.node(j).parents) {
      for (int s : cfg.tree.descendant_leaves(p)) {
        if (s != j) siblings[j].push_back(s);
      }
    }
    std::sort(siblings[j].begin(), siblings[j].end());
    siblings[j].erase(std::unique(siblings[j].begin(), siblings[j].end()),
                      siblings[j].end());
  }

  Rng rng(cfg.seed);
  struct Sample {
    std::vector<std::uint8_t> y;
    Eigen::VectorXf x;
  };
  // Per class: generate its primary samples, then carve out val/test.
  std::vector<std::vector<Sample>> per_split(3);
  for (int j = 0; j < cfg.k; ++j) {
    long c = counts[static_cast<std::size_t>(j)];
    long n_test = std::max(1L, std::lround(0.15 * double(c)));
    long n_val = std::max(1L, std::lround(0.15 * double(c)));
    for (long s = 0; s < c; ++s) {
      Sample smp;
      smp.y.assign(static_cast<std::size_t>(cfg.k), 0);
      smp.y[static_cast<std::size_t>(j)] = 1;
      if (rng.uniform() < cfg.cooccur_rate) {
        int extra = j;
        if (!siblings[j].empty() && rng.uniform() < 0.8) {
          extra = siblings[j][rng.below(siblings[j].size())];
        } else {
          // Frequency-weighted draw so the co-occurring tail does not get
          // flooded with extra positives, which would flatten the imbalance.
          long r = static_cast<long>(rng.below(static_cast<std::uint64_t>(cfg.n)));
          for (int l = 0; l < cfg.k; ++l) {
            r -= counts[static_cast<std::size_t>(l)];
            if (r < 0) {
              extra = l;
              break;
            }
          }
        }
        if (extra != j) smp.y[static_cast<std::size_t>(extra)] = 1;
      }
      // Feature: mean of positive-leaf prototypes plus isotropic noise.
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(cfg.d);
      int npos = 0;
      for (int l = 0; l < cfg.k; ++l) {
        if (smp.y[static_cast<std::size_t>(l)]) {
          mu += protos.row(l).transpose();
          ++npos;
        }
      }
      mu /= double(npos);
      Eigen::VectorXd x(cfg.d);
      for (Eigen::Index t = 0; t < cfg.d; ++t) {
        x[t] = mu[t] + cfg.noise_sigma * rng.normal();
      }
      smp.x = x.cast<float>();
      int split_idx = (s < n_test) ? 2 : (s < n_test + n_val ? 1 : 0);
      per_split[static_cast<std::size_t>(split_idx)].push_back(std::move(smp));
    }
  }

  DatasetTriple out;
  MultiLabelDataset* dst[3] = {&out.train, &out.val, &out.test};
  Split names[3] = {Split::train, Split::val, Split::test};
  for (int s = 0; s < 3; ++s) {
    auto& rows = per_split[static_cast<std::size_t>(s)];
    // Deterministic shuffle so classes are interleaved within the split.
    for (std::size_t i = rows.size(); i > 1; --i) {
      std::swap(rows[i - 1], rows[rng.below(i)]);
    }
    auto& ds = *dst[s];
    Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    ds.features.resize(m, cfg.d);
    ds.labels = LabelMatrix::zeros(m, cfg.k);
    for (Eigen::Index i = 0; i < m; ++i) {
      ds.features.row(i) = rows[static_cast<std::size_t>(i)].x.transpose();
      for (Eigen::Index j = 0; j < cfg.k; ++j) {
        ds.labels.at(i, j) = rows[static_cast<std::size_t>(i)].y[static_cast<std::size_t>(j)];
      }
    }
    ds.class_counts = ds.labels.column_counts();
    ds.split = names[s];
    ds.seed = cfg.seed;
    for (Eigen::Index j = 0; j < cfg.k; ++j) {
      if (ds.class_counts[static_cast<std::size_t>(j)] == 0) {
        throw Error("synth: class " + std::to_string(j) + " missing from split " +
                    split_name(names[s]));
      }
    }
  }
  return out;
}

void save_dataset(const MultiLabelDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["n"] = ds.n();
  manifest["k"] = ds.k();
  manifest["d"] = ds.d();
  manifest["split"] = split_name(ds.split);
  manifest["seed"] = ds.seed;
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";

  std::ofstream fb(dir / "features.bin", std::ios::binary);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      float v = ds.features(i, j);
      fb.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
  }

  std::ofstream lb(dir / "labels.csv");
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.k(); ++j) {
      if (j) lb << ',';
      lb << int(ds.labels(i, j));
    }
    lb << '\n';
  }
}

MultiLabelDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw Error("dataset: missing manifest at " + (dir / "manifest.json").string());
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::parse_error& e) {
    throw Error("dataset: bad manifest: " + std::string(e.what()));
  }
  MultiLabelDataset ds;
  Eigen::Index n = manifest.at("n").get<Eigen::Index>();
  Eigen::Index k = manifest.at("k").get<Eigen::Index>();
  Eigen::Index d = manifest.at("d").get<Eigen::Index>();
  ds.split = split_from_name(manifest.at("split").get<std::string>());
  ds.seed = manifest.at("seed").get<std::uint64_t>();

  std::ifstream fb(dir / "features.bin", std::ios::binary);
  if (!fb) throw Error("dataset: missing features.bin");
  ds.features.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      float v;
      if (!fb.read(reinterpret_cast<char*>(&v), sizeof(float))) {
        throw Error("dataset: features.bin truncated at row " + std::to_string(i));
      }
      ds.features(i, j) = v;
    }
  }
  float extra;
  if (fb.read(reinterpret_cast<char*>(&extra), sizeof(float))) {
    throw Error("dataset: features.bin larger than manifest shape n*d");
  }

  std::ifstream lb(dir / "labels.csv");
  if (!lb) throw Error("dataset: missing labels.csv");
  ds.labels = LabelMatrix::zeros(n, k);
  std::string line;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(lb, line)) throw Error("dataset: labels.csv truncated at row " +
                                             std::to_string(i));
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index j = 0;
    while (std::getline(ss, cell, ',')) {
      if (j >= k) throw Error("dataset: labels.csv row " + std::to_string(i) +
                              " wider than k");
      ds.labels.at(i, j++) = cell == "1" ? 1 : 0;
    }
    if (j != k) throw Error("dataset: labels.csv row " + std::to_string(i) +
                            " has " + std::to_string(j) + " columns, expected k=" +
                            std::to_string(k));
  }
  ds.class_counts = ds.labels.column_counts();
  return ds;
}

void save_triple(const DatasetTriple& t, const std::filesystem::path& dir) {
  save_dataset(t.train, dir / "train");
  save_dataset(t.val, dir / "val");
  save_dataset(t.test, dir / "test");
}

DatasetTriple load_triple(const std::filesystem::path& dir) {
  DatasetTriple t;
  t.train = load_dataset(dir / "train");
  t.val = load_dataset(dir / "val");
  t.test = load_dataset(dir / "test");
  return t;
}

}  // namespace ltml
