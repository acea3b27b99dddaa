#include "smoothtraj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace smoothtraj {

namespace {

void check_lengths(const PredictionSet& pred, std::span<const Vec2> truth) {
  if (pred.heads.empty()) throw std::invalid_argument("metrics: empty prediction set");
  for (const auto& head : pred.heads) {
    if (head.size() != truth.size()) throw std::invalid_argument("metrics: prediction/truth length mismatch");
  }
  if (truth.empty()) throw std::invalid_argument("metrics: empty ground truth");
}

std::vector<Vec2> positions_of(const Trajectory& t) { return t.positions(); }

int strategy_rank(const std::string& s) {
  if (s == "none") return 0;
  if (s == "eval") return 1;
  if (s == "train_eval") return 2;
  return 3;
}

int goal_rank(const std::string& g) {
  if (g == "none") return 0;
  if (g == "pos") return 1;
  if (g == "ctrl") return 2;
  return 3;
}

std::string format_level(double v) {
  if (v == std::floor(v)) return fmt::format("{:.1f}", v);
  return fmt::format("{}", v);
}

std::string strategy_label(const std::string& s) {
  if (s == "eval") return "eval";
  if (s == "train_eval") return "train & eval";
  return s;
}

}  // namespace

std::vector<double> head_ades(const PredictionSet& pred, std::span<const Vec2> truth) {
  check_lengths(pred, truth);
  std::vector<double> out;
  out.reserve(pred.heads.size());
  for (const auto& head : pred.heads) {
    double total = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) total += norm(head[t] - truth[t]);
    out.push_back(total / static_cast<double>(truth.size()));
  }
  return out;
}

double ade(const PredictionSet& pred, std::span<const Vec2> truth) {
  const auto per_head = head_ades(pred, truth);
  double total = 0.0;
  for (double a : per_head) total += a;
  return total / static_cast<double>(per_head.size());
}

double min_ade(const PredictionSet& pred, std::span<const Vec2> truth) {
  const auto per_head = head_ades(pred, truth);
  return *std::min_element(per_head.begin(), per_head.end());
}

double fde(const PredictionSet& pred, std::span<const Vec2> truth) {
  check_lengths(pred, truth);
  double total = 0.0;
  for (const auto& head : pred.heads) total += norm(head.back() - truth.back());
  return total / static_cast<double>(pred.heads.size());
}

double ade(const PredictionSet& pred, const Trajectory& truth) { return ade(pred, positions_of(truth)); }
double fde(const PredictionSet& pred, const Trajectory& truth) { return fde(pred, positions_of(truth)); }
double min_ade(const PredictionSet& pred, const Trajectory& truth) { return min_ade(pred, positions_of(truth)); }

void write_records_csv(std::span<const EvalRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.scene_id, r.strategy, r.goal, r.sigma, r.d_max, r.ade,
                       r.fde, r.min_ade);
  }
}

std::vector<EvalRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error(path.string() + ": missing or unexpected CSV header");
  }
  std::vector<EvalRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 8) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
    }
    try {
      records.push_back({fields[0], fields[1], fields[2], std::stod(fields[3]), std::stod(fields[4]),
                         std::stod(fields[5]), std::stod(fields[6]), std::stod(fields[7])});
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return records;
}

bool row_before(const RowKey& a, const RowKey& b) {
  const int sa = strategy_rank(a.strategy), sb = strategy_rank(b.strategy);
  if (sa != sb) return sa < sb;
  if (a.strategy != b.strategy) return a.strategy < b.strategy;
  const int ga = goal_rank(a.goal), gb = goal_rank(b.goal);
  if (ga != gb) return ga < gb;
  if (a.goal != b.goal) return a.goal < b.goal;
  return a.sigma < b.sigma;
}

std::optional<Cell> Table::at(const RowKey& row, double d_max) const {
  const auto r = std::find(rows.begin(), rows.end(), row);
  const auto c = std::find(columns.begin(), columns.end(), d_max);
  if (r == rows.end() || c == columns.end()) return std::nullopt;
  return cells[static_cast<std::size_t>(r - rows.begin())][static_cast<std::size_t>(c - columns.begin())];
}

std::optional<std::size_t> Table::column_min(std::size_t column) const {
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cell = cells[r][column];
    if (!cell) continue;
    if (!best || cell->mean_min_ade < cells[*best][column]->mean_min_ade) best = r;
  }
  return best;
}

Table aggregate(std::span<const EvalRecord> records, std::span<const RowKey> expected_rows,
                std::span<const double> expected_columns) {
  if (records.empty() && expected_rows.empty()) throw std::invalid_argument("aggregate: no records");
  Table table;
  auto add_row = [&](const RowKey& k) {
    if (std::find(table.rows.begin(), table.rows.end(), k) == table.rows.end()) table.rows.push_back(k);
  };
  auto add_column = [&](double d) {
    if (std::find(table.columns.begin(), table.columns.end(), d) == table.columns.end()) table.columns.push_back(d);
  };
  for (const auto& k : expected_rows) add_row(k);
  for (double d : expected_columns) add_column(d);
  for (const auto& r : records) {
    add_row({r.strategy, r.goal, r.sigma});
    add_column(r.d_max);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), row_before);
  std::sort(table.columns.begin(), table.columns.end());

  struct Acc {
    double min_ade = 0.0;
    double ade = 0.0;
    std::size_t n = 0;
  };
  std::vector<std::vector<Acc>> acc(table.rows.size(), std::vector<Acc>(table.columns.size()));
  for (const auto& r : records) {
    const auto ri = static_cast<std::size_t>(
        std::find(table.rows.begin(), table.rows.end(), RowKey{r.strategy, r.goal, r.sigma}) - table.rows.begin());
    const auto ci = static_cast<std::size_t>(
        std::find(table.columns.begin(), table.columns.end(), r.d_max) - table.columns.begin());
    acc[ri][ci].min_ade += r.min_ade;
    acc[ri][ci].ade += r.ade;
    ++acc[ri][ci].n;
  }
  table.cells.assign(table.rows.size(), std::vector<std::optional<Cell>>(table.columns.size()));
  for (std::size_t ri = 0; ri < table.rows.size(); ++ri) {
    for (std::size_t ci = 0; ci < table.columns.size(); ++ci) {
      const auto& a = acc[ri][ci];
      if (a.n == 0) continue;
      const double n = static_cast<double>(a.n);
      table.cells[ri][ci] = Cell{a.min_ade / n, a.ade / n, a.n};
    }
  }
  return table;
}

std::string render_markdown(const Table& table, const std::string& title) {
  std::string out;
  if (!title.empty()) out += "### " + title + "\n\n";
  out += "| Applied | Goal | σ [m] |";
  for (double d : table.columns) out += d == 0.0 ? " (0.0) |" : " " + format_level(d) + " |";
  out += "\n|---|---|---|";
  for (std::size_t c = 0; c < table.columns.size(); ++c) out += "---|";
  out += "\n";

  std::vector<std::optional<std::size_t>> minima;
  for (std::size_t c = 0; c < table.columns.size(); ++c) minima.push_back(table.column_min(c));

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& key = table.rows[r];
    if (key.strategy == "none") {
      out += "| No Smoothing | | (0.0) |";
    } else {
      out += "| " + strategy_label(key.strategy) + " | " + key.goal + " | " + format_level(key.sigma) + " |";
    }
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const auto& cell = table.cells[r][c];
      if (!cell) {
        out += " – |";
      } else if (minima[c] == r) {
        out += fmt::format(" **{:.3f}** |", cell->mean_min_ade);
      } else {
        out += fmt::format(" {:.3f} |", cell->mean_min_ade);
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace smoothtraj
