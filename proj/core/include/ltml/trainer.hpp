#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ltml/dataset.hpp"
#include "ltml/distill.hpp"
#include "ltml/losses.hpp"
#include "ltml/model.hpp"

namespace ltml {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 128;
  KdConfig kd;
  bool crt_freeze = false;
  bool use_mlmc_phase2 = true;  // ICS-MLMC in phase 2 instead of plain ICS
  std::uint64_t seed = 0;
  double lr_initial = 1e-3;
  double lr_floor = 1e-7;
  int lr_patience = 5;
  long t_many = 100;
  long t_few = 10;

  // Strict JSON: unknown keys are rejected. Accepted keys: epochs, batch_size,
  // alpha, beta, gamma, temperature, kl_variant, crt_freeze, use_mlmc_phase2,
  // seed, lr_initial, lr_floor, lr_patience, group_thresholds.
  static TrainConfig from_json(const std::string& text);
  std::string to_json() const;
  std::string hash() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct RunRecord {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double wall_seconds = 0.0;
  std::string config_hash;
};

std::string run_record_jsonl(const RunRecord& rec);

struct PhaseResult {
  ModelBundle model;  // best-validation checkpoint
  RunRecord record;
};

struct TeacherBundle {
  ModelBundle teacher1;  // trained on the original distribution
  ModelBundle teacher2;  // trained with re-balancing
};

// Phase 1: hierarchy-aware pre-training under instance-balanced sampling.
PhaseResult train_phase1(const DatasetTriple& data, const HierarchyTree& tree,
                         const TrainConfig& cfg, bool use_mlmc = true);

// Phase 2: re-training with instance-wise class-balanced weighting over
// class-balanced batches, initialized from teacher 1. With use_ics off this is
// plain fine-tuning under instance-balanced sampling. Extractor frozen iff
// cfg.crt_freeze.
PhaseResult train_phase2(const DatasetTriple& data, const HierarchyTree& tree,
                         const TrainConfig& cfg, const ModelBundle& teacher1,
                         bool use_ics = true);

// Phase 3: hybrid distillation into a freshly initialized student. Feature
// distillation follows teacher 1's embeddings, logits distillation teacher 2's
// outputs; classification term is the re-balanced BCE (plain BCE when use_ics
// is off).
PhaseResult train_phase3(const DatasetTriple& data, const HierarchyTree& tree,
                         const TrainConfig& cfg, const TeacherBundle& teachers,
                         bool use_ics = true);

struct PipelineOptions {
  bool use_mlmc = true;
  bool use_ics = true;
  bool crt_freeze = false;
  bool use_kd = true;
};

struct PipelineResult {
  ModelBundle teacher1, teacher2, student;
  RunRecord rec1, rec2, rec3;
  bool ran_phase2 = false;
  bool ran_phase3 = false;
};

// Sequential composition of the three phases. Disabled components degrade
// gracefully: without re-balancing or freezing, phase 2 is skipped and
// teacher 2 aliases teacher 1; without distillation the student aliases the
// last trained teacher.
PipelineResult run_pipeline(const DatasetTriple& data, const HierarchyTree& tree,
                            const TrainConfig& cfg, const PipelineOptions& opts = {});

const ModelBundle& final_model(const PipelineResult& r);

// Writes teacher/student checkpoints, per-phase epoch logs (JSON lines), and a
// pipeline manifest into dir.
void save_pipeline(const PipelineResult& r, const TrainConfig& cfg,
                   const std::filesystem::path& dir);

struct AblationRow {
  std::string name;
  PipelineOptions opts;
};

// The component on/off grid: none, each single component, the pairwise and
// full combinations used for reporting.
std::vector<AblationRow> standard_ablation_rows();

// Runs every row over `seeds` trials and returns a CSV of averaged metrics.
std::string ablation_grid_csv(const DatasetTriple& data, const HierarchyTree& tree,
                              const TrainConfig& base_cfg,
                              const std::vector<AblationRow>& rows, int seeds);

}  // namespace ltml
