#pragma once

// Displacement metrics over prediction sets and their aggregation into
// robustness tables (rows: defense configuration, columns: attack budget).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smoothtraj/core.hpp"

namespace smoothtraj {

/// Mean Euclidean error over all heads and timesteps.
double ade(const PredictionSet& pred, std::span<const Vec2> truth);
/// Mean over heads of the error at the last timestep.
double fde(const PredictionSet& pred, std::span<const Vec2> truth);
/// Per-head ADE, then the minimum over heads.
double min_ade(const PredictionSet& pred, std::span<const Vec2> truth);
std::vector<double> head_ades(const PredictionSet& pred, std::span<const Vec2> truth);

double ade(const PredictionSet& pred, const Trajectory& truth);
double fde(const PredictionSet& pred, const Trajectory& truth);
double min_ade(const PredictionSet& pred, const Trajectory& truth);

/// One evaluated (scene, defense, attack budget) combination.
/// strategy is "none", "eval" or "train_eval"; goal is "none", "pos" or "ctrl".
struct EvalRecord {
  std::string scene_id;
  std::string strategy;
  std::string goal;
  double sigma = 0.0;
  double d_max = 0.0;
  double ade = 0.0;
  double fde = 0.0;
  double min_ade = 0.0;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

inline constexpr const char* kCsvHeader = "scene_id,strategy,goal,sigma,d_max,ade,fde,min_ade";

void write_records_csv(std::span<const EvalRecord> records, const std::filesystem::path& path);
std::vector<EvalRecord> read_records_csv(const std::filesystem::path& path);

struct RowKey {
  std::string strategy;
  std::string goal;
  double sigma = 0.0;

  friend bool operator==(const RowKey&, const RowKey&) = default;
};

/// Table order: no smoothing first, then eval before train_eval, pos before
/// ctrl, ascending sigma.
bool row_before(const RowKey& a, const RowKey& b);

struct Cell {
  double mean_min_ade = 0.0;
  double mean_ade = 0.0;
  std::size_t count = 0;
};

struct Table {
  std::vector<RowKey> rows;
  std::vector<double> columns;                       // d_max values, ascending
  std::vector<std::vector<std::optional<Cell>>> cells;  // [row][column]

  std::optional<Cell> at(const RowKey& row, double d_max) const;
  /// Row index of the smallest headline value in a column, if any cell exists.
  std::optional<std::size_t> column_min(std::size_t column) const;
};

/// Mean over scenes per (row, d_max). Rows and columns found in the records
/// are merged with the expected ones; cells without records stay empty.
Table aggregate(std::span<const EvalRecord> records, std::span<const RowKey> expected_rows = {},
                std::span<const double> expected_columns = {});

/// Markdown rendering; the minimum of each column is bold, gaps show as "–".
std::string render_markdown(const Table& table, const std::string& title);

}  // namespace smoothtraj
