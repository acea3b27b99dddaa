#pragma once

// Robustness sweep: for every scenario family, train (or load) the base
// model and the noise-trained models, attack the test scenes once per d_max
// on the base model, and evaluate every defense row against every attack
// column. Results are written as one CSV and one Markdown table per family.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smoothtraj/attack.hpp"
#include "smoothtraj/metrics.hpp"
#include "smoothtraj/predictor.hpp"
#include "smoothtraj/scenarios.hpp"
#include "smoothtraj/smoothing.hpp"

namespace smoothtraj {

/// Records for one (model, smoothing) cell over a list of (possibly attacked)
/// scenes. Scene i uses smoothing seed derived from (seed, i), so every
/// column of a row sees the same noise draws.
std::vector<EvalRecord> evaluate_scenes(const ModelParams& params, std::span<const AttackedScene> scenes,
                                        const std::optional<SmoothingConfig>& smoothing, const std::string& strategy,
                                        std::uint64_t seed);

struct FamilySpec {
  Family family = Family::kLeftTurn;
  // Dataset: either explicit JSONL paths or generated from (count, split).
  std::optional<std::filesystem::path> train_path;
  std::optional<std::filesystem::path> test_path;
  int count = 1000;
  std::vector<double> split{0.7, 0.1, 0.2};
  // Checkpoints; missing ones are trained and written under <out>/checkpoints.
  std::optional<std::filesystem::path> base_checkpoint;
  std::map<std::string, std::filesystem::path> smoothed_checkpoints;  // key "pos:0.25"
};

struct SweepConfig {
  std::vector<FamilySpec> families;
  std::vector<double> d_max{0.25, 0.5, 1.0};
  std::vector<double> sigmas{0.25, 0.5, 1.0};
  std::vector<SmoothingGoal> goals{SmoothingGoal::kPosition, SmoothingGoal::kControl};
  std::vector<std::string> strategies{"eval", "train_eval"};
  bool include_no_smoothing = true;
  int n_samples = 20;
  int max_test_scenes = 200;
  AttackConfig attack;
  TrainConfig train;
  std::uint64_t seed = 0;
  bool re_attack_per_model = false;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);
SweepConfig load_sweep_config(const std::filesystem::path& path);

/// Rows of the table, in display order.
std::vector<RowKey> sweep_rows(const SweepConfig& cfg);
/// Columns: 0 (benign) followed by cfg.d_max.
std::vector<double> sweep_columns(const SweepConfig& cfg);

std::string smoothed_key(SmoothingGoal goal, double sigma);

struct FamilyResult {
  Family family = Family::kLeftTurn;
  std::vector<EvalRecord> records;
  Table table;
  std::filesystem::path csv_path;
  std::filesystem::path table_path;
  std::size_t attacks_generated = 0;
  std::size_t attacks_reused = 0;
  std::size_t cells = 0;
  std::vector<std::string> failures;
};

struct SweepResult {
  std::vector<FamilyResult> families;

  std::size_t cell_count() const;
  std::size_t failed_cells() const;
  /// True when more than 1% of the cells failed.
  bool failed() const;
};

/// Runs the whole sweep into `out_dir`, reusing cached datasets,
/// checkpoints and attacks whose content keys still match.
SweepResult run_sweep(const SweepConfig& cfg, const std::filesystem::path& out_dir);

/// Re-renders <dir>/tables.md from every <dir>/<family>/results.csv.
/// Returns the rendered Markdown.
std::string report(const std::filesystem::path& results_dir);

/// 64-bit FNV-1a, used as a content key for cached artifacts.
std::uint64_t content_hash(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace smoothtraj
