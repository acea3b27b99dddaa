#pragma once

// Synthetic two-agent driving scenes. Both agents are simulated through the
// double integrator from piecewise-constant (longitudinal acceleration,
// curvature) programs plus a small sinusoidal jitter, so pasts and futures
// are kinematically consistent by construction.
//
//   left_turn:  the target approaches an intersection heading north and turns
//               left across the path of an oncoming ego vehicle.
//   roundabout: the ego circulates counter-clockwise; the target approaches
//               tangentially, yields, then merges onto the circle ahead of it.

#include <cstdint>
#include <string>
#include <vector>

#include "smoothtraj/core.hpp"

namespace smoothtraj {

enum class Family { kLeftTurn, kRoundabout };

std::string to_string(Family family);
Family parse_family(const std::string& text);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct ScenarioConfig {
  Family family = Family::kLeftTurn;
  int count = 100;
  int H = 10;
  int T = 12;
  double dt = 0.5;
  std::uint64_t seed = 0;

  Range approach_speed{7.0, 12.0};    // m/s, target
  Range ego_speed{8.0, 14.0};         // m/s; roundabout uses 0.6x of it
  Range brake{-2.0, -0.5};            // m/s^2 before the maneuver
  Range exit_accel{0.3, 1.5};         // m/s^2 after the maneuver
  Range turn_radius{9.0, 18.0};       // m, left turn
  Range turn_angle_deg{75.0, 100.0};  // left turn
  Range roundabout_radius{14.0, 22.0};
  Range gap{12.0, 40.0};              // m, ego distance from the conflict point
  double jitter = 0.1;                // m/s^2 amplitude
  double min_speed = 3.5;             // m/s floor while braking
};

/// `cfg.count` scenes; scene i depends only on (seed, family, i).
/// Throws std::invalid_argument for count <= 0 or degenerate ranges.
std::vector<Scene> generate(const ScenarioConfig& cfg);

struct Split {
  std::vector<Scene> train;
  std::vector<Scene> val;
  std::vector<Scene> test;
  std::vector<std::string> warnings;
};

/// Seeded shuffle, then contiguous partitions of sizes round(f0 n),
/// round(f1 n) and the remainder. Fractions must sum to 1.
Split split(const std::vector<Scene>& scenes, const std::vector<double>& fractions, std::uint64_t seed);

/// Past followed by future of one agent.
std::vector<AgentState> full_track(const AgentTrack& agent);
/// Unwrapped heading change of the velocity from first to last state [rad].
double net_heading_change(const std::vector<AgentState>& states);
/// Signed curvature per state, cross(v, u) / |v|^3.
std::vector<double> curvatures(const std::vector<AgentState>& states);
/// No two curvatures above `threshold` in magnitude have opposite signs.
bool curvature_sign_monotone(const std::vector<AgentState>& states, double threshold = 0.01);

/// Family self-check on the target: left turns change heading by more than
/// 45 degrees, roundabout merges keep one curvature sign.
bool matches_family(const Scene& scene, Family family);

}  // namespace smoothtraj
