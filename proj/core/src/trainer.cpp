#include "ltml/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ltml/error.hpp"
#include "ltml/eval.hpp"
#include "ltml/sampling.hpp"
#include "json.hpp"

namespace ltml {

using nlohmann::json;

namespace {

// Fixed desk-scale architecture: d -> 64 -> 32-dim embedding -> k logits.
const std::vector<Eigen::Index> kHidden = {64};
constexpr Eigen::Index kEmbeddingDim = 32;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd label_rows(const LabelMatrix& labels,
                           const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(rows.size()), labels.k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < labels.k; ++j) {
      Y(static_cast<Eigen::Index>(i), j) = labels(rows[i], j);
    }
  }
  return Y;
}

Eigen::MatrixXd matrix_rows(const Eigen::MatrixXd& M,
                            const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd R(static_cast<Eigen::Index>(rows.size()), M.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    R.row(static_cast<Eigen::Index>(i)) = M.row(rows[i]);
  }
  return R;
}

enum class LossKind { bce, mlmc, ics, ics_mlmc };

// Full objective at a batch: classification term per kind, plus the two
// distillation terms when kd is set. Fills gradients w.r.t. student logits
// and (for feature distillation) embeddings.
double compute_objective(const ModelBundle& model, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Y, const Eigen::MatrixXd* sqrt_delta,
                         LossKind kind, const HierarchyTree* tree, const KdConfig* kd,
                         const ModelBundle* t1, const ModelBundle* t2,
                         Eigen::MatrixXd* dZ_out, Eigen::MatrixXd* dV_out) {
  auto [V, Z] = forward(model, X);
  LossResult cls;
  switch (kind) {
    case LossKind::bce:
      cls = bce_multilabel(Z, Y);
      break;
    case LossKind::mlmc:
      cls = mlmc_loss(Z, Y, *tree);
      break;
    case LossKind::ics:
      cls = bce_multilabel(Z, Y, sqrt_delta);
      break;
    case LossKind::ics_mlmc:
      cls = mlmc_loss(Z, Y, *tree, sqrt_delta, /*weight_parents=*/false);
      break;
  }
  if (!kd) {
    if (dZ_out) *dZ_out = std::move(cls.dlogits);
    if (dV_out) dV_out->resize(0, 0);
    return cls.value;
  }
  auto [V1, Z1] = forward(*t1, X);
  auto [V2, Z2] = forward(*t2, X);
  (void)Z1;
  (void)V2;
  KdResult fkd = feature_kd(V1, V);
  KdResult ckd = logits_kd(Z, Z2, kd->temperature, kd->kl_variant);
  double total = total_loss(cls.value, fkd.value, ckd.value, *kd);
  if (dZ_out) {
    *dZ_out = (1.0 - kd->alpha - kd->beta) * cls.dlogits + kd->beta * ckd.dstudent;
  }
  if (dV_out) *dV_out = kd->alpha * kd->gamma * fkd.dstudent;
  return total;
}

struct PhaseSetup {
  LossKind kind = LossKind::bce;
  SamplerKind sampler = SamplerKind::instance_balanced;
  std::uint64_t sampler_stream = 1;
  bool freeze = false;
  const HierarchyTree* tree = nullptr;
  const KdConfig* kd = nullptr;
  const ModelBundle* t1 = nullptr;
  const ModelBundle* t2 = nullptr;
  const char* name = "phase";
};

bool uses_delta(LossKind k) { return k == LossKind::ics || k == LossKind::ics_mlmc; }

PhaseResult run_phase(const DatasetTriple& data, const TrainConfig& cfg,
                      ModelBundle model, const PhaseSetup& ps) {
  auto t0 = std::chrono::steady_clock::now();
  const auto& train = data.train;
  const auto& val = data.val;
  if (train.n() < 1 || val.n() < 1) throw Error("trainer: empty train or val split");

  Eigen::MatrixXd X_train = train.features.cast<double>();
  Eigen::MatrixXd X_val = val.features.cast<double>();
  Eigen::MatrixXd Y_val = label_rows(val.labels, [&] {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(val.n()));
    for (Eigen::Index i = 0; i < val.n(); ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }());

  Eigen::MatrixXd sqrt_delta_train, sqrt_delta_val;
  if (uses_delta(ps.kind)) {
    sqrt_delta_train = compute_delta(train.labels).sqrt_delta;
    sqrt_delta_val = compute_delta(val.labels).sqrt_delta;
  }

  SamplerSpec spec;
  spec.kind = ps.sampler;
  spec.batch_size = cfg.batch_size;
  spec.seed = mix_seed(cfg.seed, ps.sampler_stream);
  BatchSampler sampler(spec, train.labels);

  AdamState adam = AdamState::like(model);
  LrSchedule sched;
  sched.lr = cfg.lr_initial;
  sched.floor = cfg.lr_floor;
  sched.patience = cfg.lr_patience;

  const int steps = std::max<int>(1, static_cast<int>(train.n() / cfg.batch_size));
  PhaseResult out;
  out.record.config_hash = cfg.hash();
  ModelBundle best = model;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double train_loss = 0.0;
    for (int s = 0; s < steps; ++s) {
      auto rows = sampler.draw_batch();
      Eigen::MatrixXd Xb = matrix_rows(X_train, rows);
      Eigen::MatrixXd Yb = label_rows(train.labels, rows);
      Eigen::MatrixXd Wb;
      const Eigen::MatrixXd* wptr = nullptr;
      if (uses_delta(ps.kind)) {
        Wb = matrix_rows(sqrt_delta_train, rows);
        wptr = &Wb;
      }
      Eigen::MatrixXd dZ, dV;
      double value = compute_objective(model, Xb, Yb, wptr, ps.kind, ps.tree, ps.kd,
                                       ps.t1, ps.t2, &dZ, &dV);
      if (!std::isfinite(value)) {
        throw Error(std::string("trainer: ") + ps.name + " diverged at epoch " +
                    std::to_string(epoch));
      }
      GradBundle grads = backward(model, Xb, dV.size() ? &dV : nullptr, &dZ, ps.freeze);
      adam_step(adam, model, grads, sched.lr, ps.freeze);
      train_loss += value;
    }
    train_loss /= steps;

    const Eigen::MatrixXd* vw = uses_delta(ps.kind) ? &sqrt_delta_val : nullptr;
    double val_loss = compute_objective(model, X_val, Y_val, vw, ps.kind, ps.tree,
                                        ps.kd, ps.t1, ps.t2, nullptr, nullptr);
    if (!std::isfinite(val_loss)) {
      throw Error(std::string("trainer: ") + ps.name + " diverged at epoch " +
                  std::to_string(epoch));
    }
    out.record.epochs.push_back({epoch, train_loss, val_loss, sched.lr});
    if (val_loss < best_val) {
      best_val = val_loss;
      best = model;
      out.record.best_epoch = epoch;
    }
    sched.step(val_loss);
  }
  out.model = std::move(best);
  out.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void parse_config_fields(const json& j, TrainConfig& cfg);

}  // namespace

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("config: malformed JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw Error("config: expected a JSON object");
  TrainConfig cfg;
  try {
    parse_config_fields(j, cfg);
  } catch (const json::exception& e) {
    throw Error("config: " + std::string(e.what()));
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw Error("config: epochs and batch_size must be >= 1");
  }
  cfg.kd.validate();
  return cfg;
}

namespace {
void parse_config_fields(const json& j, TrainConfig& cfg) {
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") {
      cfg.epochs = value.get<int>();
    } else if (key == "batch_size") {
      cfg.batch_size = value.get<int>();
    } else if (key == "alpha") {
      cfg.kd.alpha = value.get<double>();
    } else if (key == "beta") {
      cfg.kd.beta = value.get<double>();
    } else if (key == "gamma") {
      cfg.kd.gamma = value.get<double>();
    } else if (key == "temperature") {
      cfg.kd.temperature = value.get<double>();
    } else if (key == "kl_variant") {
      std::string v = value.get<std::string>();
      if (v == "full_binary") {
        cfg.kd.kl_variant = KlVariant::full_binary;
      } else if (v == "literal") {
        cfg.kd.kl_variant = KlVariant::literal;
      } else {
        throw Error("config: kl_variant must be 'full_binary' or 'literal'");
      }
    } else if (key == "crt_freeze") {
      cfg.crt_freeze = value.get<bool>();
    } else if (key == "use_mlmc_phase2") {
      cfg.use_mlmc_phase2 = value.get<bool>();
    } else if (key == "seed") {
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "lr_initial") {
      cfg.lr_initial = value.get<double>();
    } else if (key == "lr_floor") {
      cfg.lr_floor = value.get<double>();
    } else if (key == "lr_patience") {
      cfg.lr_patience = value.get<int>();
    } else if (key == "group_thresholds") {
      if (!value.is_array() || value.size() != 2) {
        throw Error("config: group_thresholds must be [t_many, t_few]");
      }
      cfg.t_many = value[0].get<long>();
      cfg.t_few = value[1].get<long>();
    } else {
      throw Error("config: unknown key '" + key + "'");
    }
  }
}
}  // namespace

std::string TrainConfig::to_json() const {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["alpha"] = kd.alpha;
  j["beta"] = kd.beta;
  j["gamma"] = kd.gamma;
  j["temperature"] = kd.temperature;
  j["kl_variant"] = kd.kl_variant == KlVariant::full_binary ? "full_binary" : "literal";
  j["crt_freeze"] = crt_freeze;
  j["use_mlmc_phase2"] = use_mlmc_phase2;
  j["seed"] = seed;
  j["lr_initial"] = lr_initial;
  j["lr_floor"] = lr_floor;
  j["lr_patience"] = lr_patience;
  j["group_thresholds"] = {t_many, t_few};
  return j.dump(2);
}

std::string TrainConfig::hash() const {
  std::string s = to_json();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string run_record_jsonl(const RunRecord& rec) {
  std::ostringstream os;
  for (const auto& e : rec.epochs) {
    json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_loss"] = e.val_loss;
    j["lr"] = e.lr;
    os << j.dump() << "\n";
  }
  return os.str();
}

PhaseResult train_phase1(const DatasetTriple& data, const HierarchyTree& tree,
                         const TrainConfig& cfg, bool use_mlmc) {
  if (tree.leaf_count() != data.train.k()) throw Error("trainer: tree/dataset k mismatch");
  ModelBundle model = ModelBundle::init(data.train.d(), kHidden, kEmbeddingDim,
                                        data.train.k(), cfg.seed);
  PhaseSetup ps;
  ps.kind = use_mlmc ? LossKind::mlmc : LossKind::bce;
  ps.sampler = SamplerKind::instance_balanced;
  ps.sampler_stream = 1;
  ps.tree = &tree;
  ps.name = "phase1";
  return run_phase(data, cfg, std::move(model), ps);
}

PhaseResult train_phase2(const DatasetTriple& data, const HierarchyTree& tree,
                         const TrainConfig& cfg, const ModelBundle& teacher1,
                         bool use_ics) {
  PhaseSetup ps;
  if (use_ics) {
    ps.kind = cfg.use_mlmc_phase2 ? LossKind::ics_mlmc : LossKind::ics;
    ps.sampler = SamplerKind::class_balanced;
  } else {
    ps.kind = cfg.use_mlmc_phase2 ? LossKind::mlmc : LossKind::bce;
    ps.sampler = SamplerKind::instance_balanced;
  }
  ps.sampler_stream = 2;
  ps.freeze = cfg.crt_freeze;
  ps.tree = &tree;
  ps.name = "phase2";
  return run_phase(data, cfg, teacher1, ps);
}

PhaseResult train_phase3(const DatasetTriple& data, const HierarchyTree& tree,
                         const TrainConfig& cfg, const TeacherBundle& teachers,
                         bool use_ics) {
  ModelBundle student = ModelBundle::init(data.train.d(), kHidden, kEmbeddingDim,
                                          data.train.k(), mix_seed(cfg.seed, 3));
  PhaseSetup ps;
  ps.kind = use_ics ? LossKind::ics : LossKind::bce;
  ps.sampler = use_ics ? SamplerKind::class_balanced : SamplerKind::instance_balanced;
  ps.sampler_stream = 4;
  ps.tree = &tree;
  ps.kd = &cfg.kd;
  ps.t1 = &teachers.teacher1;
  ps.t2 = &teachers.teacher2;
  ps.name = "phase3";
  return run_phase(data, cfg, std::move(student), ps);
}

PipelineResult run_pipeline(const DatasetTriple& data, const HierarchyTree& tree,
                            const TrainConfig& cfg, const PipelineOptions& opts) {
  PipelineResult r;
  TrainConfig local = cfg;
  local.crt_freeze = opts.crt_freeze;
  local.use_mlmc_phase2 = cfg.use_mlmc_phase2 && opts.use_mlmc;

  auto p1 = train_phase1(data, tree, local, opts.use_mlmc);
  r.teacher1 = std::move(p1.model);
  r.rec1 = std::move(p1.record);

  if (opts.use_ics || opts.crt_freeze) {
    auto p2 = train_phase2(data, tree, local, r.teacher1, opts.use_ics);
    r.teacher2 = std::move(p2.model);
    r.rec2 = std::move(p2.record);
    r.ran_phase2 = true;
  } else {
    r.teacher2 = r.teacher1;
  }

  if (opts.use_kd) {
    TeacherBundle teachers{r.teacher1, r.teacher2};
    auto p3 = train_phase3(data, tree, local, teachers, opts.use_ics);
    r.student = std::move(p3.model);
    r.rec3 = std::move(p3.record);
    r.ran_phase3 = true;
  } else {
    r.student = r.teacher2;
  }
  return r;
}

const ModelBundle& final_model(const PipelineResult& r) {
  if (r.ran_phase3) return r.student;
  if (r.ran_phase2) return r.teacher2;
  return r.teacher1;
}

void save_pipeline(const PipelineResult& r, const TrainConfig& cfg,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_checkpoint(r.teacher1, cfg.seed, r.rec1.best_epoch, dir / "teacher1.ckpt");
  save_checkpoint(r.teacher2, cfg.seed, r.rec2.best_epoch, dir / "teacher2.ckpt");
  save_checkpoint(r.student, cfg.seed, r.rec3.best_epoch, dir / "student.ckpt");
  auto write = [&](const RunRecord& rec, const char* name) {
    std::ofstream os(dir / name);
    os << run_record_jsonl(rec);
  };
  write(r.rec1, "phase1.jsonl");
  write(r.rec2, "phase2.jsonl");
  write(r.rec3, "phase3.jsonl");
  json manifest;
  manifest["config"] = json::parse(cfg.to_json());
  manifest["config_hash"] = cfg.hash();
  manifest["ran_phase2"] = r.ran_phase2;
  manifest["ran_phase3"] = r.ran_phase3;
  manifest["final"] = r.ran_phase3 ? "student" : (r.ran_phase2 ? "teacher2" : "teacher1");
  std::ofstream os(dir / "pipeline.json");
  os << manifest.dump(2) << "\n";
}

std::vector<AblationRow> standard_ablation_rows() {
  return {
      {"none", {false, false, false, false}},
      {"mlmc", {true, false, false, false}},
      {"ics", {false, true, false, false}},
      {"crt", {false, false, true, false}},
      {"hybrid_kd", {false, false, false, true}},
      {"mlmc_ics", {true, true, false, false}},
      {"full", {true, true, true, true}},
  };
}

std::string ablation_grid_csv(const DatasetTriple& data, const HierarchyTree& tree,
                              const TrainConfig& base_cfg,
                              const std::vector<AblationRow>& rows, int seeds) {
  if (seeds < 1) throw Error("ablation: seeds must be >= 1");
  GroupAssignment groups =
      assign_groups(data.train.class_counts, base_cfg.t_many, base_cfg.t_few);
  std::ostringstream os;
  os << "name,mlmc,ics,crt,hybrid_kd,val_many,val_medium,val_few,val_average,"
        "val_average_std,test_average\n";
  for (const auto& row : rows) {
    std::vector<EvalReport> val_reports, test_reports;
    for (int s = 0; s < seeds; ++s) {
      TrainConfig cfg = base_cfg;
      cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(s);
      PipelineResult pr = run_pipeline(data, tree, cfg, row.opts);
      val_reports.push_back(evaluate(final_model(pr), data.val, groups));
      test_reports.push_back(evaluate(final_model(pr), data.test, groups));
    }
    double vm = 0, vmed = 0, vf = 0, va = 0, ta = 0;
    for (int s = 0; s < seeds; ++s) {
      vm += val_reports[s].map_many;
      vmed += val_reports[s].map_medium;
      vf += val_reports[s].map_few;
      va += val_reports[s].average;
      ta += test_reports[s].average;
    }
    vm /= seeds; vmed /= seeds; vf /= seeds; va /= seeds; ta /= seeds;
    double vstd = 0.0;
    if (seeds > 1) {
      double ss = 0.0;
      for (int s = 0; s < seeds; ++s) {
        double d = val_reports[s].average - va;
        ss += d * d;
      }
      vstd = std::sqrt(ss / (seeds - 1));
    }
    os << row.name << ',' << row.opts.use_mlmc << ',' << row.opts.use_ics << ','
       << row.opts.crt_freeze << ',' << row.opts.use_kd << ',' << vm << ',' << vmed
       << ',' << vf << ',' << va << ',' << vstd << ',' << ta << '\n';
  }
  return os.str();
}

}  // namespace ltml
