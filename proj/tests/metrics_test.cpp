#include "smoothtraj/metrics.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "gtest/gtest.h"

namespace smoothtraj {
namespace {

std::vector<Vec2> line(int n) {
  std::vector<Vec2> out;
  for (int t = 0; t < n; ++t) out.push_back({1.5 * t, -0.5 * t});
  return out;
}

std::vector<Vec2> offset(const std::vector<Vec2>& base, Vec2 by) {
  std::vector<Vec2> out;
  for (const auto& p : base) out.push_back(p + by);
  return out;
}

EvalRecord record(std::string id, std::string strategy, std::string goal, double sigma, double d_max,
                  double min_ade) {
  return {std::move(id), std::move(strategy), std::move(goal), sigma, d_max, min_ade + 1.0, min_ade + 2.0, min_ade};
}

TEST(Ade, PerfectPredictionIsZero) {
  const auto truth = line(12);
  const PredictionSet pred{{truth, truth}};
  EXPECT_EQ(ade(pred, truth), 0.0);
  EXPECT_EQ(fde(pred, truth), 0.0);
  EXPECT_EQ(min_ade(pred, truth), 0.0);
}

TEST(Ade, PythagoreanOffset) {
  const auto truth = line(12);
  const PredictionSet pred{{offset(truth, {3, 4})}};
  EXPECT_DOUBLE_EQ(ade(pred, truth), 5.0);
  EXPECT_DOUBLE_EQ(fde(pred, truth), 5.0);
}

TEST(Ade, TwoHeads) {
  const auto truth = line(6);
  const PredictionSet pred{{offset(truth, {1, 0}), offset(truth, {0, -3})}};
  EXPECT_DOUBLE_EQ(ade(pred, truth), 2.0);
  EXPECT_DOUBLE_EQ(min_ade(pred, truth), 1.0);
  EXPECT_EQ(head_ades(pred, truth), (std::vector<double>{1.0, 3.0}));
}

TEST(Ade, FinalErrorUsesLastStepOnly) {
  auto truth = line(4);
  auto head = truth;
  head.back() = head.back() + Vec2{0, 2};
  const PredictionSet pred{{head}};
  EXPECT_DOUBLE_EQ(fde(pred, truth), 2.0);
  EXPECT_DOUBLE_EQ(ade(pred, truth), 0.5);
}

TEST(Ade, LengthMismatchRejected) {
  const PredictionSet pred{{line(5)}};
  EXPECT_THROW(ade(pred, line(6)), std::invalid_argument);
  EXPECT_THROW(min_ade(PredictionSet{}, line(6)), std::invalid_argument);
}

TEST(Ade, Properties) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec2> truth;
    PredictionSet pred;
    pred.heads.resize(4);
    for (int t = 0; t < 12; ++t) {
      truth.push_back({n(rng), n(rng)});
      for (auto& h : pred.heads) h.push_back({n(rng), n(rng)});
    }
    EXPECT_LE(min_ade(pred, truth), ade(pred, truth));
    const Vec2 shift{n(rng) * 100, n(rng) * 100};
    PredictionSet moved = pred;
    for (auto& h : moved.heads) h = offset(h, shift);
    EXPECT_NEAR(ade(moved, offset(truth, shift)), ade(pred, truth), 1e-9);
  }
}

TEST(Aggregate, SingleRecord) {
  const std::vector<EvalRecord> records{record("a", "none", "none", 0.0, 0.0, 1.25)};
  const Table t = aggregate(records);
  ASSERT_EQ(t.rows.size(), 1u);
  ASSERT_EQ(t.columns, std::vector<double>{0.0});
  const auto cell = t.at({"none", "none", 0.0}, 0.0);
  ASSERT_TRUE(cell);
  EXPECT_EQ(cell->mean_min_ade, 1.25);
  EXPECT_EQ(cell->mean_ade, 2.25);
  EXPECT_EQ(cell->count, 1u);
}

TEST(Aggregate, MeansOverScenes) {
  const std::vector<EvalRecord> records{record("a", "eval", "pos", 0.5, 0.25, 1.0),
                                        record("b", "eval", "pos", 0.5, 0.25, 3.0)};
  EXPECT_EQ(aggregate(records).at({"eval", "pos", 0.5}, 0.25)->mean_min_ade, 2.0);
}

TEST(Aggregate, RowOrderAndColumnMinimum) {
  const std::vector<EvalRecord> records{
      record("a", "train_eval", "pos", 0.25, 0.0, 1.5), record("a", "eval", "ctrl", 0.5, 0.0, 1.1),
      record("a", "eval", "pos", 1.0, 0.0, 0.9),        record("a", "eval", "pos", 0.25, 0.0, 1.2),
      record("a", "none", "none", 0.0, 0.0, 1.0),
  };
  const Table t = aggregate(records);
  const std::vector<RowKey> expected{{"none", "none", 0.0},
                                     {"eval", "pos", 0.25},
                                     {"eval", "pos", 1.0},
                                     {"eval", "ctrl", 0.5},
                                     {"train_eval", "pos", 0.25}};
  EXPECT_EQ(t.rows, expected);
  EXPECT_EQ(t.column_min(0), 2u);
  const std::string md = render_markdown(t, "");
  EXPECT_NE(md.find("| eval | pos | 1.0 | **0.900** |"), std::string::npos) << md;
  EXPECT_NE(md.find("| No Smoothing | | (0.0) | 1.000 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| train & eval | pos | 0.25 | 1.500 |"), std::string::npos) << md;
}

TEST(Aggregate, MissingCellsRenderAsGaps) {
  const std::vector<EvalRecord> records{record("a", "none", "none", 0.0, 0.0, 1.0)};
  const std::vector<RowKey> rows{{"eval", "ctrl", 0.25}};
  const std::vector<double> cols{0.25};
  const Table t = aggregate(records, rows, cols);
  EXPECT_FALSE(t.at({"eval", "ctrl", 0.25}, 0.25));
  const std::string md = render_markdown(t, "gaps");
  EXPECT_NE(md.find("| eval | ctrl | 0.25 | – | – |"), std::string::npos) << md;
  EXPECT_NE(md.find("| Applied | Goal | σ [m] | (0.0) | 0.25 |"), std::string::npos) << md;
}

TEST(Csv, RoundTripIsExact) {
  std::vector<EvalRecord> records;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 40; ++i) {
    records.push_back({"s-" + std::to_string(i), i % 2 ? "eval" : "train_eval", i % 3 ? "pos" : "ctrl", 0.25,
                       i % 4 * 0.25, u(rng), u(rng), u(rng) / 3.0});
  }
  const auto path = std::filesystem::temp_directory_path() / "smoothtraj_metrics.csv";
  write_records_csv(records, path);
  EXPECT_EQ(read_records_csv(path), records);
  std::filesystem::remove(path);
}

TEST(Csv, RejectsForeignHeader) {
  const auto path = std::filesystem::temp_directory_path() / "smoothtraj_bad.csv";
  {
    std::ofstream out(path);
    out << "a,b,c\n1,2,3\n";
  }
  EXPECT_THROW(read_records_csv(path), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace smoothtraj
