#pragma once

// Trajectory and scene data model, the double-integrator step, the rollout
// map from controls to trajectories and its inverse, and JSONL scene I/O.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace smoothtraj {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

double norm(Vec2 v);
double norm_inf(Vec2 v);

/// One sample of an agent state: position, velocity (auxiliary state) and
/// acceleration (control input). Always six components.
struct AgentState {
  Vec2 p;
  Vec2 v;
  Vec2 u;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

inline constexpr std::size_t kStateDim = 6;

bool is_finite(const AgentState& s);

/// Uniformly sampled sequence of agent states. `t0` is the grid index of the
/// first state: -(H-1) for observed pasts, 1 for futures.
struct Trajectory {
  std::vector<AgentState> states;
  double dt = 0.0;
  int t0 = 0;

  std::size_t size() const { return states.size(); }
  const AgentState& operator[](std::size_t i) const { return states[i]; }
  AgentState& operator[](std::size_t i) { return states[i]; }
  const AgentState& back() const { return states.back(); }

  std::vector<Vec2> positions() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct AgentTrack {
  Trajectory past;
  Trajectory future;

  friend bool operator==(const AgentTrack&, const AgentTrack&) = default;
};

/// A prediction problem: pasts and futures of all agents plus the index of
/// the (possibly adversarial) target whose future is predicted.
struct Scene {
  std::vector<AgentTrack> agents;
  std::size_t target = 0;
  int H = 0;
  int T = 0;
  double dt = 0.0;

  const Trajectory& target_past() const { return agents.at(target).past; }
  const Trajectory& target_future() const { return agents.at(target).future; }

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Initial position and velocity plus one acceleration per past timestep.
struct ControlSequence {
  Vec2 p0;
  Vec2 v0;
  std::vector<Vec2> u;

  std::size_t horizon() const { return u.size(); }

  friend bool operator==(const ControlSequence&, const ControlSequence&) = default;
};

/// K candidate futures of the target agent. Only positions are meaningful.
struct PredictionSet {
  std::vector<std::vector<Vec2>> heads;

  std::size_t num_heads() const { return heads.size(); }
  std::size_t horizon() const { return heads.empty() ? 0 : heads.front().size(); }

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

inline constexpr double kConsistencyTolerance = 1e-6;

struct PhiStep {
  Vec2 p;
  Vec2 v;
};

/// Semi-implicit Euler double integrator: v' = v + u dt, p' = p + v' dt.
PhiStep step_phi(const AgentState& state, double dt);

/// Trajectory of length H whose first state is (p0, v0, u[0]) and whose
/// later states follow step_phi driven by u[k-1].
Trajectory rollout(const ControlSequence& controls, double dt, int t0 = 0);

/// Recovers the controls of a kinematically consistent trajectory. Throws
/// std::domain_error naming the first step whose (p, v) residual against
/// step_phi exceeds `tolerance`.
ControlSequence inverse_controls(const Trajectory& trajectory,
                                 double tolerance = kConsistencyTolerance);

/// Maximum (p, v) residual of the recurrence; 0 for a single-state trajectory.
double consistency_residual(const Trajectory& trajectory);

/// Checks all Scene invariants; throws std::invalid_argument on violation.
void validate(const Scene& scene);

// Flat six-column row encoding used by the JSONL files.
std::vector<std::vector<double>> to_rows(const Trajectory& trajectory);
Trajectory from_rows(const std::vector<std::vector<double>>& rows, double dt, int t0);

/// Scene object with keys in the fixed order dt, H, T, target, agents.
nlohmann::ordered_json scene_to_json(const Scene& scene);
/// Unknown keys are ignored so annotated files (attack output) parse too.
Scene scene_from_json(const nlohmann::json& j);

/// One scene per line. Blank lines are skipped; a malformed line raises
/// std::runtime_error carrying its 1-based line number.
std::vector<Scene> read_scenes(const std::filesystem::path& path);
void write_scenes(std::span<const Scene> scenes, const std::filesystem::path& path);

}  // namespace smoothtraj
