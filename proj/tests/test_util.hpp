#pragma once

// Fixtures shared by the unit tests.

#include <cmath>
#include <random>
#include <vector>

#include "smoothtraj/core.hpp"

namespace smoothtraj::testing {

inline ControlSequence random_controls(std::mt19937_64& rng, int H) {
  std::normal_distribution<double> n(0.0, 1.0);
  ControlSequence u;
  u.p0 = {5.0 * n(rng), 5.0 * n(rng)};
  u.v0 = {3.0 * n(rng), 3.0 * n(rng)};
  for (int k = 0; k < H; ++k) u.u.push_back({n(rng), n(rng)});
  return u;
}

/// Agent under constant acceleration from (p0, v0), past then future.
inline AgentTrack straight_track(Vec2 p0, Vec2 v0, Vec2 accel, int H, int T, double dt) {
  const auto full = rollout({p0, v0, std::vector<Vec2>(static_cast<std::size_t>(H + T), accel)}, dt);
  AgentTrack a;
  a.past.dt = a.future.dt = dt;
  a.past.t0 = -(H - 1);
  a.future.t0 = 1;
  a.past.states.assign(full.states.begin(), full.states.begin() + H);
  a.future.states.assign(full.states.begin() + H, full.states.end());
  return a;
}

/// Two-agent scene: target on a straight constant-acceleration path, the
/// other agent cruising in parallel 6 m to its left.
inline Scene straight_scene(Vec2 p0, Vec2 v0, Vec2 accel, int H = 10, int T = 12, double dt = 0.5) {
  Scene s;
  s.H = H;
  s.T = T;
  s.dt = dt;
  s.target = 0;
  s.agents.push_back(straight_track(p0, v0, accel, H, T, dt));
  s.agents.push_back(straight_track(p0 + Vec2{0.0, 6.0}, v0, {0.0, 0.0}, H, T, dt));
  return s;
}

/// Random straight-line scenes with non-zero longitudinal acceleration.
inline std::vector<Scene> straight_scenes(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> speed(4.0, 12.0), accel(-1.0, 1.0), heading(-0.4, 0.4), pos(-20.0, 20.0);
  std::vector<Scene> out;
  for (int i = 0; i < count; ++i) {
    const double h = heading(rng), v = speed(rng), a = accel(rng);
    const Vec2 dir{std::cos(h), std::sin(h)};
    out.push_back(straight_scene({pos(rng), pos(rng)}, dir * v, dir * a));
  }
  return out;
}

}  // namespace smoothtraj::testing
