#include "smoothtraj/harness.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "smoothtraj/parallel.hpp"
#include "smoothtraj/rng.hpp"

namespace smoothtraj {

namespace fs = std::filesystem;

std::uint64_t content_hash(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return content_hash(ss.str());
}

std::vector<EvalRecord> evaluate_scenes(const ModelParams& params, std::span<const AttackedScene> scenes,
                                        const std::optional<SmoothingConfig>& smoothing, const std::string& strategy,
                                        std::uint64_t seed) {
  std::vector<EvalRecord> records(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    const AttackedScene& a = scenes[i];
    PredictionSet pred;
    if (smoothing) {
      SmoothingConfig cell = *smoothing;
      cell.seed = make_stream(seed, {3, i})();
      pred = smooth_predict(params, a.scene, a.perturbed_past, cell);
    } else {
      pred = predict(params, a.scene, a.perturbed_past);
    }
    const Trajectory& truth = a.scene.target_future();
    EvalRecord& r = records[i];
    r.scene_id = a.id;
    r.strategy = smoothing ? strategy : "none";
    r.goal = smoothing ? to_string(smoothing->goal) : "none";
    r.sigma = smoothing ? smoothing->sigma : 0.0;
    r.d_max = a.d_max;
    r.ade = ade(pred, truth);
    r.fde = fde(pred, truth);
    r.min_ade = min_ade(pred, truth);
  });
  return records;
}

namespace {

std::vector<double> number_list(const nlohmann::json& j, const char* key, std::vector<double> fallback) {
  return j.contains(key) ? j[key].get<std::vector<double>>() : fallback;
}

std::string checkpoint_tag(const std::optional<TrainSmoothing>& smoothing) {
  if (!smoothing) return "base";
  return fmt::format("train_{}_{}", to_string(smoothing->goal), smoothing->sigma);
}

std::string train_key(const TrainConfig& t, std::uint64_t data_hash) {
  std::string key = fmt::format("w{} k{} e{} b{} lr{} s{} d{:016x}", t.dims.width, t.dims.heads, t.epochs,
                                t.batch_size, t.learning_rate, t.seed, data_hash);
  if (t.smoothing) key += fmt::format(" {}:{}", to_string(t.smoothing->goal), t.smoothing->sigma);
  return key;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

struct FamilyData {
  std::vector<Scene> train;
  std::vector<Scene> test;
  fs::path test_file;
};

FamilyData load_data(const FamilySpec& spec, const SweepConfig& cfg, const fs::path& dir) {
  FamilyData data;
  const std::string name = to_string(spec.family);
  if (spec.train_path && spec.test_path) {
    data.train = read_scenes(*spec.train_path);
    data.test = read_scenes(*spec.test_path);
  } else {
    ScenarioConfig sc;
    sc.family = spec.family;
    sc.count = spec.count;
    sc.seed = cfg.seed;
    Split parts = split(generate(sc), spec.split, cfg.seed);
    for (const auto& w : parts.warnings) std::cerr << "warning: " << name << ": " << w << '\n';
    data.train = std::move(parts.train);
    data.test = std::move(parts.test);
    write_scenes(data.train, dir / (name + "_train.jsonl"));
    write_scenes(parts.val, dir / (name + "_val.jsonl"));
  }
  if (static_cast<int>(data.test.size()) > cfg.max_test_scenes) {
    data.test.resize(static_cast<std::size_t>(cfg.max_test_scenes));
  }
  if (data.train.empty() || data.test.empty()) throw std::runtime_error(name + ": empty train or test set");
  data.test_file = dir / (name + "_test.jsonl");
  write_scenes(data.test, data.test_file);
  return data;
}

// Loads `explicit_path` if given, else a cached checkpoint whose training key
// matches, else trains and caches.
ModelParams obtain_model(const std::optional<fs::path>& explicit_path, const fs::path& cache, const TrainConfig& tc,
                         std::span<const Scene> scenes, std::uint64_t data_hash) {
  if (explicit_path && fs::exists(*explicit_path)) return load_checkpoint(*explicit_path);
  const fs::path key_file = fs::path(cache).concat(".key");
  const std::string key = train_key(tc, data_hash);
  if (fs::exists(cache) && fs::exists(key_file) && read_text(key_file) == key) return load_checkpoint(cache);
  ModelParams params = train(scenes, tc);
  save_checkpoint(params, cache);
  write_text(key_file, key);
  return params;
}

std::vector<AttackedScene> benign_set(std::span<const Scene> test, const std::string& prefix) {
  std::vector<AttackedScene> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) out.push_back(benign(test[i], fmt::format("{}-{:05d}", prefix, i)));
  return out;
}

}  // namespace

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  SweepConfig cfg;
  for (const auto& f : j.at("families")) {
    FamilySpec spec;
    spec.family = parse_family(f.at("family").get<std::string>());
    if (f.contains("train")) spec.train_path = f["train"].get<std::string>();
    if (f.contains("test")) spec.test_path = f["test"].get<std::string>();
    if (spec.train_path.has_value() != spec.test_path.has_value()) {
      throw std::invalid_argument("sweep config: give both train and test paths or neither");
    }
    spec.count = f.value("count", spec.count);
    spec.split = number_list(f, "split", spec.split);
    if (f.contains("base_checkpoint")) spec.base_checkpoint = f["base_checkpoint"].get<std::string>();
    if (f.contains("smoothed_checkpoints")) {
      for (const auto& [k, v] : f["smoothed_checkpoints"].items()) spec.smoothed_checkpoints[k] = v.get<std::string>();
    }
    cfg.families.push_back(std::move(spec));
  }
  cfg.d_max = number_list(j, "d_max", cfg.d_max);
  cfg.sigmas = number_list(j, "sigmas", cfg.sigmas);
  if (j.contains("goals")) {
    cfg.goals.clear();
    for (const auto& g : j["goals"]) cfg.goals.push_back(parse_goal(g.get<std::string>()));
  }
  if (j.contains("strategies")) cfg.strategies = j["strategies"].get<std::vector<std::string>>();
  for (const auto& s : cfg.strategies) {
    if (s != "eval" && s != "train_eval") throw std::invalid_argument("sweep config: unknown strategy " + s);
  }
  cfg.include_no_smoothing = j.value("include_no_smoothing", cfg.include_no_smoothing);
  cfg.n_samples = j.value("n_samples", cfg.n_samples);
  cfg.max_test_scenes = j.value("max_test_scenes", cfg.max_test_scenes);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.re_attack_per_model = j.value("re_attack_per_model", cfg.re_attack_per_model);
  if (j.contains("attack")) {
    const auto& a = j["attack"];
    cfg.attack.iterations = a.value("iterations", cfg.attack.iterations);
    if (a.contains("alpha") && !a["alpha"].is_null()) cfg.attack.alpha = a["alpha"].get<double>();
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.dims.width = t.value("width", cfg.train.dims.width);
    cfg.train.dims.heads = t.value("heads", cfg.train.dims.heads);
  }
  if (cfg.families.empty() || cfg.n_samples < 1 || cfg.max_test_scenes < 1) {
    throw std::invalid_argument("sweep config: need families, n_samples >= 1 and max_test_scenes >= 1");
  }
  for (double d : cfg.d_max) {
    if (!(d > 0.0)) throw std::invalid_argument("sweep config: d_max values must be positive");
  }
  return cfg;
}

SweepConfig load_sweep_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return sweep_config_from_json(nlohmann::json::parse(in));
}

std::string smoothed_key(SmoothingGoal goal, double sigma) { return fmt::format("{}:{}", to_string(goal), sigma); }

std::vector<RowKey> sweep_rows(const SweepConfig& cfg) {
  std::vector<RowKey> rows;
  if (cfg.include_no_smoothing) rows.push_back({"none", "none", 0.0});
  for (const auto& strategy : cfg.strategies) {
    for (auto goal : cfg.goals) {
      for (double sigma : cfg.sigmas) rows.push_back({strategy, to_string(goal), sigma});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), row_before);
  return rows;
}

std::vector<double> sweep_columns(const SweepConfig& cfg) {
  std::vector<double> cols{0.0};
  cols.insert(cols.end(), cfg.d_max.begin(), cfg.d_max.end());
  return cols;
}

std::size_t SweepResult::cell_count() const {
  std::size_t n = 0;
  for (const auto& f : families) n += f.cells;
  return n;
}

std::size_t SweepResult::failed_cells() const {
  std::size_t n = 0;
  for (const auto& f : families) n += f.failures.size();
  return n;
}

bool SweepResult::failed() const { return failed_cells() * 100 > cell_count(); }

SweepResult run_sweep(const SweepConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir / "data");
  fs::create_directories(out_dir / "checkpoints");
  fs::create_directories(out_dir / "attacks");

  SweepResult result;
  for (const auto& spec : cfg.families) {
    const std::string name = to_string(spec.family);
    FamilyResult fr;
    fr.family = spec.family;

    const FamilyData data = load_data(spec, cfg, out_dir / "data");
    const std::uint64_t train_hash = [&] {
      std::string all;
      for (const auto& s : data.train) all += scene_to_json(s).dump();
      return content_hash(all);
    }();
    TrainConfig base_tc = cfg.train;
    base_tc.dims.agents = static_cast<int>(data.train.front().agents.size());
    base_tc.dims.H = data.train.front().H;
    base_tc.dims.T = data.train.front().T;
    base_tc.seed = cfg.seed;
    base_tc.smoothing.reset();

    auto model_path = [&](const std::optional<TrainSmoothing>& s) {
      return out_dir / "checkpoints" / fmt::format("{}_{}.json", name, checkpoint_tag(s));
    };
    const ModelParams base = obtain_model(spec.base_checkpoint, model_path(std::nullopt), base_tc, data.train, train_hash);

    std::map<std::string, ModelParams> smoothed;
    const bool want_train_eval =
        std::find(cfg.strategies.begin(), cfg.strategies.end(), "train_eval") != cfg.strategies.end();
    if (want_train_eval) {
      for (auto goal : cfg.goals) {
        for (double sigma : cfg.sigmas) {
          TrainConfig tc = base_tc;
          tc.smoothing = TrainSmoothing{goal, sigma};
          const std::string key = smoothed_key(goal, sigma);
          std::optional<fs::path> given;
          if (auto it = spec.smoothed_checkpoints.find(key); it != spec.smoothed_checkpoints.end()) given = it->second;
          smoothed[key] = obtain_model(given, model_path(tc.smoothing), tc, data.train, train_hash);
        }
      }
    }

    // Attacks are generated once per (model, d_max) and cached under a key
    // covering the model, the test data and the attack settings.
    const std::uint64_t test_hash = file_hash(data.test_file);
    std::map<std::string, std::vector<AttackedScene>> attack_cache;
    auto attacks_for = [&](const ModelParams& model, const std::string& model_tag,
                           double d_max) -> const std::vector<AttackedScene>& {
      const std::string file_stem = fmt::format("{}_{}_dmax{}", name, model_tag, d_max);
      if (auto it = attack_cache.find(file_stem); it != attack_cache.end()) return it->second;
      AttackConfig ac = cfg.attack;
      ac.d_max = d_max;
      ac.seed = cfg.seed;
      std::string model_bytes;
      for (double t : model.theta) model_bytes += fmt::format("{},", t);
      const std::string key =
          fmt::format("model {:016x} data {:016x} dmax {} iters {} alpha {}", content_hash(model_bytes), test_hash,
                      d_max, ac.iterations, ac.alpha ? fmt::format("{}", *ac.alpha) : "auto");
      const fs::path file = out_dir / "attacks" / (file_stem + ".jsonl");
      const fs::path key_file = out_dir / "attacks" / (file_stem + ".key");
      std::vector<AttackedScene> attacked;
      if (fs::exists(file) && fs::exists(key_file) && read_text(key_file) == key) {
        attacked = read_attacked_scenes(file);
        ++fr.attacks_reused;
      } else {
        attacked = attack_all(model, data.test, ac, name);
        write_attacked_scenes(attacked, file);
        write_text(key_file, key);
        ++fr.attacks_generated;
      }
      return attack_cache.emplace(file_stem, std::move(attacked)).first->second;
    };

    const std::vector<AttackedScene> benign_scenes = benign_set(data.test, name);
    const auto rows = sweep_rows(cfg);
    const auto columns = sweep_columns(cfg);

    for (const auto& row : rows) {
      const bool trained = row.strategy == "train_eval";
      const ModelParams* model = &base;
      std::string model_tag = "base";
      if (trained) {
        const std::string key = fmt::format("{}:{}", row.goal, row.sigma);
        model = &smoothed.at(key);
        model_tag = checkpoint_tag(model->trained_with);
      }
      std::optional<SmoothingConfig> smoothing;
      if (row.strategy != "none") smoothing = SmoothingConfig{parse_goal(row.goal), row.sigma, cfg.n_samples, 0};

      for (double d_max : columns) {
        ++fr.cells;
        try {
          std::span<const AttackedScene> inputs = benign_scenes;
          if (d_max > 0.0) {
            inputs = cfg.re_attack_per_model ? attacks_for(*model, model_tag, d_max) : attacks_for(base, "base", d_max);
          }
          auto records = evaluate_scenes(*model, inputs, smoothing, row.strategy, cfg.seed);
          fr.records.insert(fr.records.end(), records.begin(), records.end());
        } catch (const std::exception& e) {
          fr.failures.push_back(fmt::format("{} {} {} d_max={}: {}", row.strategy, row.goal, row.sigma, d_max, e.what()));
          std::cerr << "cell failed: " << fr.failures.back() << '\n';
        }
      }
    }

    fs::create_directories(out_dir / name);
    fr.csv_path = out_dir / name / "results.csv";
    fr.table_path = out_dir / name / "table.md";
    write_records_csv(fr.records, fr.csv_path);
    fr.table = aggregate(fr.records, rows, columns);
    write_text(fr.table_path, render_markdown(fr.table, fmt::format("{} (min ADE over heads, m)", name)));
    result.families.push_back(std::move(fr));
  }
  report(out_dir);
  return result;
}

std::string report(const fs::path& results_dir) {
  std::vector<fs::path> csvs;
  for (const auto& entry : fs::directory_iterator(results_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "results.csv")) csvs.push_back(entry.path() / "results.csv");
  }
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty()) throw std::runtime_error("report: no */results.csv under " + results_dir.string());
  std::string md;
  for (const auto& csv : csvs) {
    const auto records = read_records_csv(csv);
    const std::string name = csv.parent_path().filename().string();
    if (records.empty()) {
      md += "### " + name + "\n\n(no results)\n\n";
      continue;
    }
    md += render_markdown(aggregate(records), fmt::format("{} (min ADE over heads, m)", name)) + "\n";
  }
  write_text(results_dir / "tables.md", md);
  return md;
}

}  // namespace smoothtraj
