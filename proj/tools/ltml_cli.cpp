// Command-line front end: synthetic data generation, dataset statistics,
// three-phase training, evaluation, sampling simulation, and multi-seed
// report aggregation. Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ltml/dataset.hpp"
#include "ltml/error.hpp"
#include "ltml/eval.hpp"
#include "ltml/hierarchy.hpp"
#include "ltml/sampling.hpp"
#include "ltml/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw ltml::Error("cannot read " + p.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw ltml::Error("cannot write " + p.string());
  os << text;
}

ltml::HierarchyTree load_tree(const fs::path& data_dir) {
  return ltml::HierarchyTree::parse(read_file(data_dir / "hierarchy.json"));
}

ltml::MultiLabelDataset load_split(const fs::path& data_dir, const std::string& split) {
  return ltml::load_dataset(data_dir / split);
}

ltml::GroupAssignment groups_for(const fs::path& data_dir, long t_many, long t_few) {
  auto train = load_split(data_dir, "train");
  return ltml::assign_groups(train.class_counts, t_many, t_few);
}

std::vector<ltml::AblationRow> parse_grid(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ltml::Error("grid: malformed JSON: " + std::string(e.what()));
  }
  std::vector<ltml::AblationRow> rows;
  for (const auto& jr : j) {
    ltml::AblationRow row;
    // Toggles are opt-in: an empty row is the bare baseline.
    row.opts = {false, false, false, false};
    for (const auto& [key, value] : jr.items()) {
      if (key == "name") {
        row.name = value.get<std::string>();
      } else if (key == "mlmc") {
        row.opts.use_mlmc = value.get<bool>();
      } else if (key == "ics") {
        row.opts.use_ics = value.get<bool>();
      } else if (key == "crt") {
        row.opts.crt_freeze = value.get<bool>();
      } else if (key == "hybrid_kd") {
        row.opts.use_kd = value.get<bool>();
      } else {
        throw ltml::Error("grid: invalid toggle '" + key + "'");
      }
    }
    if (row.name.empty()) {
      row.name = std::to_string(rows.size());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ltml::Error("grid: no rows");
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-tailed multi-label learning toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic long-tailed dataset");
  std::string gen_out, gen_tree;
  std::uint64_t gen_seed = 42;
  long gen_n = 6000, gen_k = 24, gen_d = 32;
  double gen_rho = 100.0, gen_cooccur = 0.3, gen_noise = 1.0;
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--seed", gen_seed, "RNG seed (default 42)");
  gen->add_option("--n", gen_n, "Total samples (default 6000)");
  gen->add_option("--k", gen_k, "Leaf classes (default 24)");
  gen->add_option("--d", gen_d, "Feature dimension (default 32)");
  gen->add_option("--rho", gen_rho, "Target imbalance ratio (default 100)");
  gen->add_option("--cooccur", gen_cooccur, "Co-occurrence rate (default 0.3)");
  gen->add_option("--noise-sigma", gen_noise, "Feature noise sigma (default 1.0)");
  gen->add_option("--tree", gen_tree, "Hierarchy JSON (default: balanced 3-level tree)");
  int gen_fanout = 3;
  gen->add_option("--fanout", gen_fanout, "Fanout of the default balanced tree (default 3)");

  // stats
  auto* stats = app.add_subcommand("stats", "Print dataset statistics and shot groups");
  std::string stats_data, stats_split = "train";
  long stats_tmany = 100, stats_tfew = 10;
  stats->add_option("--data", stats_data, "Dataset directory")->required();
  stats->add_option("--split", stats_split, "Split: train, val, or test (default train)");
  stats->add_option("--t-many", stats_tmany, "Many-group threshold (default 100)");
  stats->add_option("--t-few", stats_tfew, "Few-group threshold (default 10)");

  // run-pipeline
  auto* runp = app.add_subcommand("run-pipeline", "Run the full three-phase pipeline");
  std::string rp_data, rp_config, rp_out, rp_grid;
  int rp_seeds = 1;
  std::int64_t rp_seed = -1;
  runp->add_option("--data", rp_data, "Dataset directory")->required();
  runp->add_option("--config", rp_config, "Training config JSON")->required();
  runp->add_option("--out", rp_out, "Output directory")->required();
  runp->add_option("--seed", rp_seed, "Override the config seed");
  runp->add_option("--grid", rp_grid,
                   "Ablation grid JSON ('standard' for the built-in rows); "
                   "writes ablation.csv instead of a single run");
  runp->add_option("--seeds", rp_seeds, "Trials per grid row (default 1)");

  // train-phase
  auto* tp = app.add_subcommand("train-phase", "Run a single training phase");
  std::string tp_data, tp_config, tp_out, tp_ckpt, tp_ckpt2;
  int tp_phase = 1;
  std::int64_t tp_seed = -1;
  tp->add_option("--data", tp_data, "Dataset directory")->required();
  tp->add_option("--config", tp_config, "Training config JSON")->required();
  tp->add_option("--out", tp_out, "Output directory")->required();
  tp->add_option("--phase", tp_phase, "Phase: 1, 2, or 3")->required();
  tp->add_option("--checkpoint", tp_ckpt, "Teacher 1 checkpoint (phases 2 and 3)");
  tp->add_option("--checkpoint2", tp_ckpt2, "Teacher 2 checkpoint (phase 3)");
  tp->add_option("--seed", tp_seed, "Override the config seed");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a split");
  std::string ev_data, ev_ckpt, ev_split = "test", ev_out;
  long ev_tmany = 100, ev_tfew = 10;
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--split", ev_split, "Split: val or test (default test)");
  ev->add_option("--out", ev_out, "Write report JSON here (default: print)");
  ev->add_option("--t-many", ev_tmany, "Many-group threshold (default 100)");
  ev->add_option("--t-few", ev_tfew, "Few-group threshold (default 10)");

  // report
  auto* rep = app.add_subcommand("report", "Aggregate per-seed reports (mean and std)");
  std::vector<std::string> rep_dirs;
  std::string rep_out, rep_file = "report_val.json";
  rep->add_option("dirs", rep_dirs, "Run directories to aggregate")->required();
  rep->add_option("--out", rep_out, "Write aggregate JSON here (default: print)");
  rep->add_option("--file", rep_file, "Report filename in each dir (default report_val.json)");

  // simulate-sampling
  auto* sim = app.add_subcommand("simulate-sampling", "Monte-Carlo class exposure");
  std::string sim_data, sim_sampler = "class", sim_out, sim_split = "train";
  long sim_draws = 10000;
  std::uint64_t sim_seed = 0;
  sim->add_option("--data", sim_data, "Dataset directory")->required();
  sim->add_option("--draws", sim_draws, "Number of draws (default 10000)");
  sim->add_option("--seed", sim_seed, "RNG seed (default 0)");
  sim->add_option("--sampler", sim_sampler, "Sampler: instance or class (default class)");
  sim->add_option("--split", sim_split, "Split (default train)");
  sim->add_option("--out", sim_out, "Write exposure CSV here (default: print)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      ltml::SynthConfig cfg;
      cfg.n = gen_n;
      cfg.k = gen_k;
      cfg.d = gen_d;
      cfg.target_rho = gen_rho;
      cfg.cooccur_rate = gen_cooccur;
      cfg.noise_sigma = gen_noise;
      cfg.seed = gen_seed;
      if (!gen_tree.empty()) {
        cfg.tree = ltml::HierarchyTree::parse(read_file(gen_tree));
      } else {
        cfg.tree = ltml::HierarchyTree::balanced(static_cast<int>(gen_k), 3, gen_fanout);
      }
      auto triple = ltml::generate_synthetic(cfg);
      ltml::save_triple(triple, gen_out);
      write_file(fs::path(gen_out) / "hierarchy.json", cfg.tree.to_json() + "\n");
      auto st = ltml::compute_stats(triple.train.labels);
      std::cout << "wrote " << gen_out << " (train n=" << triple.train.n()
                << ", rho=" << st.rho << ", lcard=" << st.lcard << ")\n";
    } else if (*stats) {
      auto ds = load_split(stats_data, stats_split);
      auto st = ltml::compute_stats(ds.labels);
      auto groups = ltml::assign_groups(ds.class_counts, stats_tmany, stats_tfew);
      std::cout << "split: " << stats_split << "\n"
                << "n: " << ds.n() << "  k: " << ds.k() << "  d: " << ds.d() << "\n"
                << "rho: " << st.rho << "\n"
                << "lcard: " << st.lcard << "\n"
                << "class_id,count,group\n";
      for (Eigen::Index j = 0; j < ds.k(); ++j) {
        std::cout << j << ',' << ds.class_counts[static_cast<std::size_t>(j)] << ','
                  << ltml::group_name(groups.group_of_class[static_cast<std::size_t>(j)])
                  << "\n";
      }
    } else if (*runp) {
      ltml::TrainConfig cfg;
      try {
        cfg = ltml::TrainConfig::from_json(read_file(rp_config));
      } catch (const ltml::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
      if (rp_seed >= 0) cfg.seed = static_cast<std::uint64_t>(rp_seed);
      auto triple = ltml::load_triple(rp_data);
      auto tree = load_tree(rp_data);
      if (!rp_grid.empty()) {
        auto rows = rp_grid == "standard" ? ltml::standard_ablation_rows()
                                          : parse_grid(read_file(rp_grid));
        std::string csv = ltml::ablation_grid_csv(triple, tree, cfg, rows, rp_seeds);
        write_file(fs::path(rp_out) / "ablation.csv", csv);
        std::cout << csv;
      } else {
        ltml::PipelineOptions opts;
        opts.crt_freeze = cfg.crt_freeze;
        auto result = ltml::run_pipeline(triple, tree, cfg, opts);
        ltml::save_pipeline(result, cfg, rp_out);
        auto groups = ltml::assign_groups(triple.train.class_counts, cfg.t_many, cfg.t_few);
        auto val_rep = ltml::evaluate(ltml::final_model(result), triple.val, groups);
        auto test_rep = ltml::evaluate(ltml::final_model(result), triple.test, groups);
        ltml::write_report(val_rep, fs::path(rp_out) / "report_val.json");
        ltml::write_report(test_rep, fs::path(rp_out) / "report_test.json");
        std::cout << "val average mAP:  " << val_rep.average << "\n"
                  << "test average mAP: " << test_rep.average << "\n";
      }
    } else if (*tp) {
      ltml::TrainConfig cfg;
      try {
        cfg = ltml::TrainConfig::from_json(read_file(tp_config));
      } catch (const ltml::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
      if (tp_seed >= 0) cfg.seed = static_cast<std::uint64_t>(tp_seed);
      auto triple = ltml::load_triple(tp_data);
      auto tree = load_tree(tp_data);
      ltml::PhaseResult result;
      std::string name;
      if (tp_phase == 1) {
        result = ltml::train_phase1(triple, tree, cfg);
        name = "teacher1";
      } else if (tp_phase == 2) {
        if (tp_ckpt.empty()) throw ltml::Error("phase 2 needs --checkpoint (teacher 1)");
        auto t1 = ltml::load_checkpoint(tp_ckpt);
        result = ltml::train_phase2(triple, tree, cfg, t1);
        name = "teacher2";
      } else if (tp_phase == 3) {
        if (tp_ckpt.empty() || tp_ckpt2.empty()) {
          throw ltml::Error("phase 3 needs --checkpoint and --checkpoint2");
        }
        ltml::TeacherBundle teachers{ltml::load_checkpoint(tp_ckpt),
                                     ltml::load_checkpoint(tp_ckpt2)};
        result = ltml::train_phase3(triple, tree, cfg, teachers);
        name = "student";
      } else {
        std::cerr << "error: --phase must be 1, 2, or 3\n";
        return 1;
      }
      fs::create_directories(tp_out);
      ltml::save_checkpoint(result.model, cfg.seed, result.record.best_epoch,
                            fs::path(tp_out) / (name + ".ckpt"));
      write_file(fs::path(tp_out) / ("phase" + std::to_string(tp_phase) + ".jsonl"),
                 ltml::run_record_jsonl(result.record));
      std::cout << "wrote " << tp_out << "/" << name << ".ckpt (best epoch "
                << result.record.best_epoch << ")\n";
    } else if (*ev) {
      auto ds = load_split(ev_data, ev_split);
      auto model = ltml::load_checkpoint(ev_ckpt);
      auto groups = groups_for(ev_data, ev_tmany, ev_tfew);
      auto report = ltml::evaluate(model, ds, groups);
      if (ev_out.empty()) {
        std::cout << ltml::report_to_json(report) << "\n";
      } else {
        ltml::write_report(report, ev_out);
        std::cout << "wrote " << ev_out << "\n";
      }
    } else if (*rep) {
      std::vector<ltml::EvalReport> reports;
      for (const auto& dir : rep_dirs) {
        reports.push_back(ltml::report_from_json(read_file(fs::path(dir) / rep_file)));
      }
      auto agg = ltml::aggregate_trials(reports);
      std::string out = ltml::aggregate_to_json(agg) + "\n";
      if (rep_out.empty()) {
        std::cout << out;
      } else {
        write_file(rep_out, out);
        std::cout << "wrote " << rep_out << "\n";
      }
    } else if (*sim) {
      auto ds = load_split(sim_data, sim_split);
      ltml::SamplerSpec spec;
      if (sim_sampler == "instance") {
        spec.kind = ltml::SamplerKind::instance_balanced;
      } else if (sim_sampler == "class") {
        spec.kind = ltml::SamplerKind::class_balanced;
      } else {
        std::cerr << "error: --sampler must be 'instance' or 'class'\n";
        return 1;
      }
      spec.seed = sim_seed;
      auto exposure = ltml::simulate_exposure(spec, ds.labels, sim_draws);
      std::string csv = ltml::exposure_csv(exposure, sim_draws);
      if (sim_out.empty()) {
        std::cout << csv;
      } else {
        write_file(sim_out, csv);
        std::cout << "wrote " << sim_out << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
