#pragma once

// White-box projected-gradient attack on the target agent's observed past.
// The perturbation lives in control space (accelerations), so every attacked
// past is a rollout of the dynamics from the original initial state; the
// feasible set bounds the per-timestep L-infinity position displacement by
// d_max.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "smoothtraj/core.hpp"
#include "smoothtraj/predictor.hpp"

namespace smoothtraj {

struct AttackConfig {
  double d_max = 0.5;
  int iterations = 30;
  /// Step size in m/s^2; when unset, d_max / (5 * iterations * dt^2).
  std::optional<double> alpha;
  /// Recorded with the result. The attack itself is deterministic.
  std::uint64_t seed = 0;
};

struct AttackResult {
  std::vector<Vec2> delta_u;
  Trajectory perturbed_past;
  double ade_before = 0.0;
  double ade_after = 0.0;
  int iterations_run = 0;
  /// Set when a non-finite gradient stopped the iteration early.
  bool aborted = false;
};

double step_size(const AttackConfig& cfg, double dt);

/// Largest per-timestep L-infinity distance between the positions of
/// rollout(U + delta) and rollout(U).
double max_displacement(const ControlSequence& controls, std::span<const Vec2> delta_u, double dt);

/// Largest s in [0, 1] (bisection to 1e-6, feasible side) such that
/// s * delta_u keeps every position within d_max of the unperturbed rollout.
double feasible_scale(std::span<const Vec2> delta_u, const ControlSequence& controls, double dt, double d_max);

/// feasible_scale(...) * delta_u.
std::vector<Vec2> project_feasible(std::span<const Vec2> delta_u, const ControlSequence& controls, double dt,
                                   double d_max);

/// min-over-heads ADE of the prediction from the past rolled out of
/// (controls.u + delta_u), and its gradient with respect to delta_u
/// (interleaved x, y per step), through the rollout and the network.
double control_loss_gradient(const ModelParams& params, const Scene& scene, const ControlSequence& controls,
                             std::span<const Vec2> delta_u, std::vector<double>& gradient);

/// Sign-gradient ascent on the min-over-heads ADE, starting from zero
/// perturbation; returns the iterate with the largest ADE (iterate 0
/// included).
AttackResult pgd_attack(const ModelParams& params, const Scene& scene, const AttackConfig& cfg);

/// Scene annotated with the attacked target past.
struct AttackedScene {
  std::string id;
  Scene scene;
  Trajectory perturbed_past;
  double d_max = 0.0;
  int iterations = 0;
  double ade_before = 0.0;
  double ade_after = 0.0;
  int iterations_run = 0;

  friend bool operator==(const AttackedScene&, const AttackedScene&) = default;
};

/// Attacks every scene in parallel. Scene i is named `<id_prefix>-<i>`.
std::vector<AttackedScene> attack_all(const ModelParams& params, std::span<const Scene> scenes,
                                      const AttackConfig& cfg, const std::string& id_prefix = "scene");

/// Unattacked wrapper (d_max = 0, perturbed past = original past).
AttackedScene benign(const Scene& scene, std::string id);

/// Scene JSONL plus "id", "perturbed_past" and an "attack" metadata object.
/// Reading plain scene files yields benign entries.
void write_attacked_scenes(std::span<const AttackedScene> scenes, const std::filesystem::path& path);
std::vector<AttackedScene> read_attacked_scenes(const std::filesystem::path& path);

}  // namespace smoothtraj
