#pragma once

// K-head MLP trajectory predictor. Pasts of all agents (target first, others
// by distance to the target at t = 0) are expressed relative to the target's
// current position, flattened into (x, y, vx, vy) per step and mapped through
// two tanh layers to K candidate futures, which are shifted back to world
// coordinates.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smoothtraj/autodiff.hpp"
#include "smoothtraj/core.hpp"

namespace smoothtraj {

enum class SmoothingGoal { kPosition, kControl };

std::string to_string(SmoothingGoal goal);
SmoothingGoal parse_goal(const std::string& text);

struct ModelDims {
  int agents = 2;
  int H = 10;
  int T = 12;
  int width = 64;
  int heads = 6;

  std::size_t input_dim() const { return static_cast<std::size_t>(agents) * H * 4; }
  std::size_t output_dim() const { return static_cast<std::size_t>(heads) * T * 2; }
  std::size_t param_count() const;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Noise injected while training ("train & eval" strategy).
struct TrainSmoothing {
  SmoothingGoal goal = SmoothingGoal::kPosition;
  double sigma = 0.0;

  friend bool operator==(const TrainSmoothing&, const TrainSmoothing&) = default;
};

/// Flat parameter vector theta with layout W1, b1, W2, b2, W3, b3 (weights
/// row-major, one row per output unit).
struct ModelParams {
  ModelDims dims;
  std::uint64_t seed = 0;
  std::optional<TrainSmoothing> trained_with;
  std::vector<double> theta;
  std::vector<double> loss_trace;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Features are scaled by 1/kFeatureScale, raw outputs by kFeatureScale.
inline constexpr double kFeatureScale = 10.0;

/// Uniform(+-1/sqrt(fan_in)) weights, zero biases.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);

/// Agent order used for the features: target, then others by distance.
std::vector<std::size_t> agent_order(const Scene& scene);

PredictionSet predict(const ModelParams& params, const Scene& scene);
/// Same, with the target's observed past replaced by `target_past`.
PredictionSet predict(const ModelParams& params, const Scene& scene, const Trajectory& target_past);

struct VarPoint {
  ad::Var x;
  ad::Var y;
};

/// Target past positions and velocities as tape variables.
struct TapePast {
  std::vector<VarPoint> p;
  std::vector<VarPoint> v;
};

TapePast to_tape(ad::Tape& tape, const Trajectory& past);

/// Forward pass recorded on `tape`. `theta` must hold the parameter vector as
/// variables on the same tape. Returns K heads of T points.
std::vector<std::vector<VarPoint>> predict_on_tape(ad::Tape& tape, const ModelDims& dims,
                                                    std::span<const ad::Var> theta,
                                                    const Scene& scene, const TapePast& target_past);

/// Minimum over heads of the mean Euclidean error over timesteps.
ad::Var loss_min_ade(const std::vector<std::vector<VarPoint>>& prediction, const Trajectory& truth);

struct TrainConfig {
  ModelDims dims;
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::optional<TrainSmoothing> smoothing;
};

/// Mini-batch Adam on the winner-takes-all minADE loss. Per-example gradients
/// of a batch are computed in parallel and summed in example order, so the
/// result is independent of the thread count. Throws std::runtime_error
/// naming epoch and batch if the loss becomes NaN.
ModelParams train(std::span<const Scene> scenes, const TrainConfig& cfg);
/// Continues from `initial` (its dims must match cfg.dims).
ModelParams train(std::span<const Scene> scenes, const TrainConfig& cfg, ModelParams initial);

/// Loss and parameter gradient for one scene.
double example_gradient(const ModelParams& params, const Scene& scene, const Trajectory& target_past,
                        std::vector<double>& gradient);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace smoothtraj
