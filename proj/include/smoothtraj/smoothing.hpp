#pragma once

// Randomized smoothing of trajectory predictors.
//
// The smoothed predictor averages the base predictor over N noisy copies of
// the target's observed past. Two noise models are supported:
//   position goal: i.i.d. N(0, sigma^2) on every past position coordinate,
//                  velocities and controls untouched;
//   control goal:  i.i.d. N(0, sigma_a^2) on every acceleration of the
//                  recovered control sequence, re-rolled out through the
//                  dynamics, so (p0, v0) is kept and every draw stays
//                  kinematically consistent.
// Head k of the result is the sample mean of head k over the N passes.

#include <cstdint>
#include <functional>

#include "smoothtraj/core.hpp"
#include "smoothtraj/predictor.hpp"
#include "smoothtraj/rng.hpp"

namespace smoothtraj {

/// Acceleration std whose doubly integrated effect over H steps roughly
/// matches a position std of `sigma`: sigma * sqrt(3) / (sqrt(H^3) dt^2).
double sigma_ctrl(double sigma, int H, double dt);

/// Per-component noise levels implied by (goal, sigma).
struct NoiseSpec {
  double position_std = 0.0;
  double velocity_std = 0.0;
  double control_std = 0.0;
};

NoiseSpec noise_spec(SmoothingGoal goal, double sigma, int H, double dt);

/// One noisy copy of a target past. sigma == 0 returns the input unchanged.
Trajectory perturb_input(const Trajectory& past, SmoothingGoal goal, double sigma, Rng& rng);

struct SmoothingConfig {
  SmoothingGoal goal = SmoothingGoal::kPosition;
  double sigma = 0.0;
  int n_samples = 20;
  std::uint64_t seed = 0;
};

/// Any base predictor: (scene, target past to use) -> prediction set.
using PredictorFn = std::function<PredictionSet(const Scene&, const Trajectory&)>;

/// Sample i draws its noise from stream (cfg.seed, i). Passes run in parallel;
/// the mean is accumulated in sample order.
PredictionSet smooth_predict(const PredictorFn& predictor, const Scene& scene,
                             const Trajectory& target_past, const SmoothingConfig& cfg);
/// Single-threaded reference of the above; results are bit-identical.
PredictionSet smooth_predict_serial(const PredictorFn& predictor, const Scene& scene,
                                    const Trajectory& target_past, const SmoothingConfig& cfg);

PredictionSet smooth_predict(const ModelParams& params, const Scene& scene, const SmoothingConfig& cfg);
PredictionSet smooth_predict(const ModelParams& params, const Scene& scene,
                             const Trajectory& target_past, const SmoothingConfig& cfg);

}  // namespace smoothtraj
