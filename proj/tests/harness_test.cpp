#include "smoothtraj/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gtest/gtest.h"

namespace smoothtraj {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SweepConfig tiny_config() {
  SweepConfig cfg;
  FamilySpec spec;
  spec.family = Family::kRoundabout;
  spec.count = 40;
  spec.split = {0.6, 0.2, 0.2};
  cfg.families.push_back(spec);
  cfg.n_samples = 2;
  cfg.max_test_scenes = 6;
  cfg.attack.iterations = 3;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 8;
  cfg.train.dims.width = 8;
  cfg.train.dims.heads = 2;
  cfg.seed = 13;
  return cfg;
}

class HarnessTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("smoothtraj_harness_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(HarnessTest, BenignNoSmoothingCellEqualsPlainEvaluation) {
  SweepConfig cfg = tiny_config();
  cfg.strategies.clear();
  cfg.d_max.clear();
  const SweepResult result = run_sweep(cfg, dir_);
  ASSERT_EQ(result.families.size(), 1u);
  const auto& fr = result.families.front();
  EXPECT_EQ(fr.cells, 1u);
  EXPECT_EQ(fr.table.rows.size(), 1u);
  EXPECT_EQ(fr.table.columns, std::vector<double>{0.0});

  const ModelParams base = load_checkpoint(dir_ / "checkpoints" / "roundabout_base.json");
  const auto test = read_scenes(dir_ / "data" / "roundabout_test.jsonl");
  std::vector<AttackedScene> plain;
  for (std::size_t i = 0; i < test.size(); ++i) plain.push_back(benign(test[i], fmt::format("roundabout-{:05d}", i)));
  EXPECT_EQ(fr.records, evaluate_scenes(base, plain, std::nullopt, "none", cfg.seed));
  EXPECT_EQ(read_records_csv(fr.csv_path), fr.records);
}

TEST_F(HarnessTest, FullGridShapeAndAttackReuse) {
  const SweepConfig cfg = tiny_config();
  const SweepResult first = run_sweep(cfg, dir_);
  const auto& fr = first.families.front();
  EXPECT_EQ(fr.table.rows.size(), 13u);
  EXPECT_EQ(fr.table.columns, (std::vector<double>{0.0, 0.25, 0.5, 1.0}));
  EXPECT_EQ(fr.cells, 52u);
  EXPECT_TRUE(fr.failures.empty());
  EXPECT_FALSE(first.failed());
  EXPECT_EQ(fr.attacks_generated, 3u);
  for (std::size_t r = 0; r < fr.table.rows.size(); ++r) {
    for (std::size_t c = 0; c < fr.table.columns.size(); ++c) {
      ASSERT_TRUE(fr.table.cells[r][c]);
      EXPECT_EQ(fr.table.cells[r][c]->count, 6u);
    }
  }

  // Cached attacks respect the displacement budget.
  const auto attacked = read_attacked_scenes(dir_ / "attacks" / "roundabout_base_dmax0.5.jsonl");
  for (const auto& a : attacked) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.perturbed_past.size(); ++k) {
      worst = std::max(worst, norm_inf(a.perturbed_past[k].p - a.scene.target_past()[k].p));
    }
    EXPECT_LE(worst, 0.5 + 1e-9);
  }

  const std::string csv = slurp(fr.csv_path);
  fs::remove_all(dir_ / "roundabout");
  const SweepResult second = run_sweep(cfg, dir_);
  EXPECT_EQ(second.families.front().attacks_generated, 0u);
  EXPECT_EQ(second.families.front().attacks_reused, 3u);
  EXPECT_EQ(slurp(second.families.front().csv_path), csv);
}

TEST_F(HarnessTest, ReAttackPerModelCraftsMoreAttacks) {
  SweepConfig cfg = tiny_config();
  cfg.sigmas = {0.5};
  cfg.goals = {SmoothingGoal::kControl};
  cfg.d_max = {0.5};
  cfg.re_attack_per_model = true;
  const SweepResult result = run_sweep(cfg, dir_);
  // base model (no smoothing and eval rows share it) plus one noise-trained model.
  EXPECT_EQ(result.families.front().attacks_generated, 2u);
}

TEST_F(HarnessTest, ReportIsIdempotent) {
  fs::create_directories(dir_ / "left_turn");
  fs::copy_file(fs::path(SMOOTHTRAJ_TEST_DATA) / "fixture_results.csv", dir_ / "left_turn" / "results.csv");
  const std::string once = report(dir_);
  EXPECT_EQ(report(dir_), once);
  EXPECT_EQ(slurp(dir_ / "tables.md"), once);
}

TEST_F(HarnessTest, ReportMatchesGoldenFile) {
  fs::create_directories(dir_ / "left_turn");
  fs::copy_file(fs::path(SMOOTHTRAJ_TEST_DATA) / "fixture_results.csv", dir_ / "left_turn" / "results.csv");
  EXPECT_EQ(report(dir_), slurp(fs::path(SMOOTHTRAJ_TEST_DATA) / "fixture_tables.md"));
}

TEST_F(HarnessTest, ReportWithoutResultsFails) {
  fs::create_directories(dir_);
  EXPECT_THROW(report(dir_), std::runtime_error);
}

TEST(SweepConfigJson, ParsesAndValidates) {
  const auto j = nlohmann::json::parse(R"({
    "families": [{"family": "left_turn", "count": 50}, {"family": "roundabout"}],
    "d_max": [0.5], "sigmas": [0.25, 1.0], "goals": ["ctrl"], "strategies": ["eval"],
    "n_samples": 7, "seed": 3, "attack": {"iterations": 4}, "train": {"epochs": 9, "width": 12}
  })");
  const SweepConfig cfg = sweep_config_from_json(j);
  ASSERT_EQ(cfg.families.size(), 2u);
  EXPECT_EQ(cfg.families[0].count, 50);
  EXPECT_EQ(cfg.families[1].family, Family::kRoundabout);
  EXPECT_EQ(cfg.n_samples, 7);
  EXPECT_EQ(cfg.attack.iterations, 4);
  EXPECT_EQ(cfg.train.epochs, 9);
  EXPECT_EQ(cfg.train.dims.width, 12);
  EXPECT_EQ(sweep_rows(cfg).size(), 3u);
  EXPECT_EQ(sweep_columns(cfg), (std::vector<double>{0.0, 0.5}));

  EXPECT_THROW(sweep_config_from_json(nlohmann::json::parse(R"({"families": []})")), std::invalid_argument);
  EXPECT_THROW(sweep_config_from_json(nlohmann::json::parse(
                   R"({"families": [{"family": "left_turn"}], "strategies": ["always"]})")),
               std::invalid_argument);
  EXPECT_THROW(
      sweep_config_from_json(nlohmann::json::parse(R"({"families": [{"family": "left_turn"}], "n_samples": 0})")),
      std::invalid_argument);
}

TEST(ContentHash, KnownFnvValues) {
  EXPECT_EQ(content_hash(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(content_hash("a"), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace smoothtraj
