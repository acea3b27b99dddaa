// smoothtraj command line: scene generation, training, attacks, evaluation
// and the full robustness sweep.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "smoothtraj/attack.hpp"
#include "smoothtraj/harness.hpp"
#include "smoothtraj/metrics.hpp"
#include "smoothtraj/predictor.hpp"
#include "smoothtraj/scenarios.hpp"
#include "smoothtraj/smoothing.hpp"

namespace fs = std::filesystem;
using namespace smoothtraj;

namespace {

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_filename(path.stem().string() + "_" + suffix + path.extension().string());
  return out;
}

std::optional<TrainSmoothing> smoothing_option(const std::string& goal, double sigma) {
  if (goal.empty()) return std::nullopt;
  return TrainSmoothing{parse_goal(goal), sigma};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized smoothing against adversarial trajectory perturbations"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate synthetic scenes as JSONL");
  std::string family = "left_turn";
  int count = 0;
  std::uint64_t seed = 0;
  fs::path out;
  std::vector<double> fractions;
  ScenarioConfig scenario;
  gen->add_option("--family", family, "left_turn or roundabout")->required();
  gen->add_option("--count", count, "Number of scenes")->required();
  gen->add_option("--seed", seed, "RNG seed")->required();
  gen->add_option("--out", out, "Output JSONL")->required();
  gen->add_option("--H", scenario.H, "Observed steps")->capture_default_str();
  gen->add_option("--T", scenario.T, "Predicted steps")->capture_default_str();
  gen->add_option("--dt", scenario.dt, "Step [s]")->capture_default_str();
  gen->add_option("--split", fractions, "train,val,test fractions; writes <out>_{train,val,test}.jsonl")
      ->delimiter(',')
      ->expected(3);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a predictor checkpoint");
  fs::path data, ckpt;
  std::string goal;
  double sigma = 0.0;
  TrainConfig tc;
  train_cmd->add_option("--data", data, "Training scenes (JSONL)")->required();
  train_cmd->add_option("--out", out, "Checkpoint path")->required();
  train_cmd->add_option("--seed", seed, "RNG seed")->required();
  train_cmd->add_option("--smooth-goal", goal, "Train with noise: pos or ctrl");
  train_cmd->add_option("--sigma", sigma, "Noise level [m]");
  train_cmd->add_option("--epochs", tc.epochs)->capture_default_str();
  train_cmd->add_option("--batch", tc.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", tc.learning_rate)->capture_default_str();
  train_cmd->add_option("--width", tc.dims.width)->capture_default_str();
  train_cmd->add_option("--heads", tc.dims.heads)->capture_default_str();

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "PGD-attack the target past of every scene");
  double d_max = 0.5;
  int iters = 30;
  attack_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  attack_cmd->add_option("--data", data, "Scenes (JSONL)")->required();
  attack_cmd->add_option("--dmax", d_max, "Displacement limit [m]")->required();
  attack_cmd->add_option("--iters", iters, "Iterations")->capture_default_str();
  attack_cmd->add_option("--out", out, "Attacked scenes (JSONL)")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint, optionally smoothed");
  int n_samples = 20;
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--data", data, "Scenes or attacked scenes (JSONL)")->required();
  eval_cmd->add_option("--smooth-goal", goal, "pos or ctrl");
  eval_cmd->add_option("--sigma", sigma, "Noise level [m]");
  eval_cmd->add_option("--n", n_samples, "Monte Carlo samples")->capture_default_str();
  eval_cmd->add_option("--seed", seed, "RNG seed")->required();
  eval_cmd->add_option("--out", out, "CSV output")->required();

  // sweep / report
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the full robustness sweep");
  fs::path config;
  sweep_cmd->add_option("--config", config, "Sweep configuration (JSON)")->required();
  sweep_cmd->add_option("--out", out, "Output directory")->required();
  bool re_attack = false;
  sweep_cmd->add_flag("--re-attack-per-model", re_attack, "Craft attacks against each evaluated model");

  auto* report_cmd = app.add_subcommand("report", "Re-render tables from sweep results");
  report_cmd->add_option("--dir", out, "Sweep output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      scenario.family = parse_family(family);
      scenario.count = count;
      scenario.seed = seed;
      const auto scenes = generate(scenario);
      if (fractions.empty()) {
        write_scenes(scenes, out);
      } else {
        const Split parts = split(scenes, fractions, seed);
        for (const auto& w : parts.warnings) std::cerr << "warning: " << w << '\n';
        write_scenes(parts.train, with_suffix(out, "train"));
        write_scenes(parts.val, with_suffix(out, "val"));
        write_scenes(parts.test, with_suffix(out, "test"));
      }
      std::cout << fmt::format("wrote {} {} scenes\n", scenes.size(), family);
    } else if (*train_cmd) {
      const auto scenes = read_scenes(data);
      if (scenes.empty()) throw std::runtime_error("no training scenes in " + data.string());
      tc.dims.agents = static_cast<int>(scenes.front().agents.size());
      tc.dims.H = scenes.front().H;
      tc.dims.T = scenes.front().T;
      tc.seed = seed;
      tc.smoothing = smoothing_option(goal, sigma);
      const ModelParams params = train(scenes, tc);
      save_checkpoint(params, out);
      std::cout << fmt::format("final training loss {:.4f} m\n",
                               params.loss_trace.empty() ? 0.0 : params.loss_trace.back());
    } else if (*attack_cmd) {
      const ModelParams params = load_checkpoint(ckpt);
      const auto scenes = read_scenes(data);
      AttackConfig ac;
      ac.d_max = d_max;
      ac.iterations = iters;
      const auto attacked = attack_all(params, scenes, ac, data.stem().string());
      write_attacked_scenes(attacked, out);
      double before = 0.0, after = 0.0;
      for (const auto& a : attacked) {
        before += a.ade_before;
        after += a.ade_after;
      }
      const double n = attacked.empty() ? 1.0 : static_cast<double>(attacked.size());
      std::cout << fmt::format("min ADE {:.3f} -> {:.3f} m over {} scenes\n", before / n, after / n, attacked.size());
    } else if (*eval_cmd) {
      const ModelParams params = load_checkpoint(ckpt);
      const auto scenes = read_attacked_scenes(data);
      std::optional<SmoothingConfig> smoothing;
      if (!goal.empty()) smoothing = SmoothingConfig{parse_goal(goal), sigma, n_samples, 0};
      const std::string strategy = params.trained_with ? "train_eval" : "eval";
      const auto records = evaluate_scenes(params, scenes, smoothing, strategy, seed);
      write_records_csv(records, out);
      const Table table = aggregate(records);
      std::cout << render_markdown(table, "");
    } else if (*sweep_cmd) {
      SweepConfig cfg = load_sweep_config(config);
      if (re_attack) cfg.re_attack_per_model = true;
      const SweepResult result = run_sweep(cfg, out);
      std::cout << report(out);
      if (result.failed()) {
        std::cerr << fmt::format("{} of {} cells failed\n", result.failed_cells(), result.cell_count());
        return 1;
      }
    } else if (*report_cmd) {
      std::cout << report(out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
