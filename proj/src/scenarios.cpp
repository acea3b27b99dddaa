#include "smoothtraj/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "smoothtraj/parallel.hpp"
#include "smoothtraj/rng.hpp"

namespace smoothtraj {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kLaneOffset = 1.75;
constexpr double kMaxLateral = 3.5;  // m/s^2, no further speed-up beyond this in a curve

// Longitudinal acceleration and curvature commanded at step k, given the
// heading change accumulated so far.
struct Command {
  double accel = 0.0;
  double curvature = 0.0;
};
using Program = std::function<Command(int step, double heading_change)>;

struct Jitter {
  double amplitude = 0.0;
  double lateral_amplitude = 0.0;
  double omega_long = 1.0;
  double omega_lat = 1.0;
  double phase_long = 0.0;
  double phase_lat = 0.0;
};

double draw(Rng& rng, Range r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); }

Jitter draw_jitter(Rng& rng, double amplitude, double lateral_fraction) {
  Jitter j;
  j.amplitude = amplitude;
  j.lateral_amplitude = amplitude * lateral_fraction;
  j.omega_long = draw(rng, {0.4, 1.2});
  j.omega_lat = draw(rng, {0.4, 1.2});
  j.phase_long = draw(rng, {0.0, 2.0 * std::numbers::pi});
  j.phase_lat = draw(rng, {0.0, 2.0 * std::numbers::pi});
  return j;
}

double heading_of(Vec2 v) { return std::atan2(v.y, v.x); }

double wrap(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

std::vector<AgentState> simulate(Vec2 p0, Vec2 v0, int steps, double dt, double min_speed, const Program& program,
                                 const Jitter& jitter) {
  std::vector<AgentState> states;
  states.reserve(static_cast<std::size_t>(steps));
  AgentState s{p0, v0, {}};
  double turned = 0.0;
  double last_heading = heading_of(v0);
  for (int k = 0; k < steps; ++k) {
    const double speed = norm(s.v);
    const double heading = heading_of(s.v);
    turned += wrap(heading - last_heading);
    last_heading = heading;
    Command c = program(k, turned);
    if (speed < min_speed && c.accel < 0.0) c.accel = 0.0;
    if (speed * speed * std::abs(c.curvature) > kMaxLateral && c.accel > 0.0) c.accel = 0.0;
    const double t = k * dt;
    const double a_long = c.accel + jitter.amplitude * std::sin(jitter.omega_long * t + jitter.phase_long);
    const double a_lat = jitter.lateral_amplitude * std::sin(jitter.omega_lat * t + jitter.phase_lat);
    const Vec2 tangent = speed > 0.0 ? s.v * (1.0 / speed) : Vec2{1.0, 0.0};
    const Vec2 normal{-tangent.y, tangent.x};
    // Rotate the velocity along the commanded arc exactly; an explicit
    // v^2 * curvature term would inflate the speed at every step.
    const Vec2 arc_v = rotate(tangent, c.curvature * speed * dt) * (speed + a_long * dt);
    s.u = (arc_v - s.v) * (1.0 / dt) + normal * a_lat;
    states.push_back(s);
    const auto [p, v] = step_phi(s, dt);
    s = {p, v, {}};
  }
  return states;
}

AgentTrack to_track(const std::vector<AgentState>& states, int H, double dt) {
  AgentTrack a;
  a.past.dt = a.future.dt = dt;
  a.past.t0 = -(H - 1);
  a.future.t0 = 1;
  a.past.states.assign(states.begin(), states.begin() + H);
  a.future.states.assign(states.begin() + H, states.end());
  return a;
}

Vec2 polar(double angle, double length) { return {length * std::cos(angle), length * std::sin(angle)}; }

Scene left_turn_scene(const ScenarioConfig& cfg, Rng& rng) {
  const int steps = cfg.H + cfg.T;
  const int turn_start = std::uniform_int_distribution<int>(3, std::max(3, steps - 11))(rng);
  const double heading0 = std::numbers::pi / 2 + draw(rng, {-8.0, 8.0}) * kDeg;
  const double speed0 = draw(rng, cfg.approach_speed);
  const double brake = draw(rng, cfg.brake);
  const double radius = draw(rng, cfg.turn_radius);
  const double angle = draw(rng, cfg.turn_angle_deg) * kDeg;
  const double exit_accel = draw(rng, cfg.exit_accel);
  const Jitter target_jitter = draw_jitter(rng, cfg.jitter, 0.5);

  const Program target_program = [=](int k, double turned) -> Command {
    if (k < turn_start) return {brake, 0.0};
    if (turned < angle) return {0.3 * exit_accel, 1.0 / radius};
    return {exit_accel, 0.0};
  };
  const Vec2 v0 = polar(heading0, speed0);
  // Place the target so that it starts turning just before the stop line.
  const auto probe = simulate({0.0, 0.0}, v0, steps, cfg.dt, cfg.min_speed, target_program, target_jitter);
  const Vec2 turn_point{kLaneOffset, -5.0};
  const auto target = simulate(turn_point - probe[static_cast<std::size_t>(turn_start)].p, v0, steps, cfg.dt,
                               cfg.min_speed, target_program, target_jitter);

  const double ego_speed = draw(rng, cfg.ego_speed);
  const double ego_accel = draw(rng, {-0.5, 0.5});
  const double gap = draw(rng, cfg.gap);
  const Jitter ego_jitter = draw_jitter(rng, cfg.jitter, 0.5);
  const Program ego_program = [=](int, double) -> Command { return {ego_accel, 0.0}; };
  const Vec2 ego_v0 = polar(-std::numbers::pi / 2, ego_speed);
  const auto ego_probe = simulate({0.0, 0.0}, ego_v0, steps, cfg.dt, cfg.min_speed, ego_program, ego_jitter);
  const Vec2 ego_at_turn{-kLaneOffset, gap};
  const auto ego = simulate(ego_at_turn - ego_probe[static_cast<std::size_t>(turn_start)].p, ego_v0, steps, cfg.dt,
                            cfg.min_speed, ego_program, ego_jitter);

  Scene scene;
  scene.H = cfg.H;
  scene.T = cfg.T;
  scene.dt = cfg.dt;
  scene.target = 0;
  scene.agents = {to_track(target, cfg.H, cfg.dt), to_track(ego, cfg.H, cfg.dt)};
  return scene;
}

Scene roundabout_scene(const ScenarioConfig& cfg, Rng& rng) {
  const int steps = cfg.H + cfg.T;
  const int merge_step = std::uniform_int_distribution<int>(3, std::max(3, steps - 6))(rng);
  const double ring = draw(rng, cfg.roundabout_radius);
  const double heading0 = draw(rng, {-6.0, 6.0}) * kDeg;
  const double speed0 = 0.75 * draw(rng, cfg.approach_speed);
  const double brake = draw(rng, cfg.brake);
  const double exit_accel = draw(rng, cfg.exit_accel);
  const Jitter target_jitter = draw_jitter(rng, cfg.jitter, 0.3);

  const Program target_program = [=](int k, double) -> Command {
    if (k < merge_step) return {brake, 0.0};
    return {exit_accel, 1.0 / ring};
  };
  const Vec2 v0 = polar(heading0, speed0);
  const auto probe = simulate({0.0, 0.0}, v0, steps, cfg.dt, cfg.min_speed, target_program, target_jitter);
  const Vec2 entry{0.0, -ring};
  const auto target = simulate(entry - probe[static_cast<std::size_t>(merge_step)].p, v0, steps, cfg.dt,
                               cfg.min_speed, target_program, target_jitter);

  // Ego circulates counter-clockwise and reaches the angle `gap` metres
  // behind the entry at the merge step.
  const double ego_speed = 0.6 * draw(rng, cfg.ego_speed);
  const double gap = draw(rng, cfg.gap);
  const Jitter ego_jitter = draw_jitter(rng, 0.5 * cfg.jitter, 0.3);
  const Program ego_program = [=](int, double) -> Command { return {0.0, 1.0 / ring}; };
  const double wanted = -std::numbers::pi / 2 - gap / ring;
  auto ego_start = [&](double start_angle) {
    return std::pair{polar(start_angle, ring), polar(start_angle + std::numbers::pi / 2, ego_speed)};
  };
  const double guess = wanted - ego_speed * merge_step * cfg.dt / ring;
  auto [gp, gv] = ego_start(guess);
  const auto ego_probe = simulate(gp, gv, steps, cfg.dt, cfg.min_speed, ego_program, ego_jitter);
  const Vec2 at_merge = ego_probe[static_cast<std::size_t>(merge_step)].p;
  const double correction = wrap(wanted - std::atan2(at_merge.y, at_merge.x));
  const auto ego = simulate(rotate(gp, correction), rotate(gv, correction), steps, cfg.dt, cfg.min_speed,
                            ego_program, ego_jitter);

  Scene scene;
  scene.H = cfg.H;
  scene.T = cfg.T;
  scene.dt = cfg.dt;
  scene.target = 0;
  scene.agents = {to_track(target, cfg.H, cfg.dt), to_track(ego, cfg.H, cfg.dt)};
  return scene;
}

void check_range(const Range& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.lo < r.hi)) {
    throw std::invalid_argument(std::string("generate: degenerate range ") + name);
  }
}

}  // namespace

std::string to_string(Family family) { return family == Family::kLeftTurn ? "left_turn" : "roundabout"; }

Family parse_family(const std::string& text) {
  if (text == "left_turn") return Family::kLeftTurn;
  if (text == "roundabout") return Family::kRoundabout;
  throw std::invalid_argument("unknown family '" + text + "' (expected left_turn or roundabout)");
}

std::vector<Scene> generate(const ScenarioConfig& cfg) {
  if (cfg.count <= 0) throw std::invalid_argument("generate: count must be positive");
  if (cfg.H < 2 || cfg.T < 1 || !(cfg.dt > 0.0)) throw std::invalid_argument("generate: need H >= 2, T >= 1, dt > 0");
  check_range(cfg.approach_speed, "approach_speed");
  check_range(cfg.ego_speed, "ego_speed");
  check_range(cfg.brake, "brake");
  check_range(cfg.exit_accel, "exit_accel");
  check_range(cfg.turn_radius, "turn_radius");
  check_range(cfg.turn_angle_deg, "turn_angle_deg");
  check_range(cfg.roundabout_radius, "roundabout_radius");
  check_range(cfg.gap, "gap");
  if (cfg.approach_speed.lo <= 0.0 || cfg.turn_radius.lo <= 0.0 || cfg.roundabout_radius.lo <= 0.0) {
    throw std::invalid_argument("generate: speeds and radii must be positive");
  }

  std::vector<Scene> scenes(static_cast<std::size_t>(cfg.count));
  const auto family_id = static_cast<std::uint64_t>(cfg.family);
  parallel_for(scenes.size(), [&](std::size_t i) {
    Rng rng = make_stream(cfg.seed, {family_id, i});
    scenes[i] = cfg.family == Family::kLeftTurn ? left_turn_scene(cfg, rng) : roundabout_scene(cfg, rng);
  });
  for (const auto& s : scenes) validate(s);
  return scenes;
}

Split split(const std::vector<Scene>& scenes, const std::vector<double>& fractions, std::uint64_t seed) {
  if (fractions.size() != 3) throw std::invalid_argument("split: expected three fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw std::invalid_argument("split: fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");

  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(seed, {0x5b1});
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = static_cast<double>(scenes.size());
  const auto n_train = std::min(scenes.size(), static_cast<std::size_t>(std::llround(fractions[0] * n)));
  const auto n_val = std::min(scenes.size() - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));

  Split out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& bucket = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    bucket.push_back(scenes[order[i]]);
  }
  const char* names[] = {"train", "val", "test"};
  for (std::size_t k = 0; k < 3; ++k) {
    if (fractions[k] * n < 1.0) {
      out.warnings.push_back(std::string("split: ") + names[k] + " partition has fewer than one expected scene");
    }
  }
  return out;
}

std::vector<AgentState> full_track(const AgentTrack& agent) {
  std::vector<AgentState> states = agent.past.states;
  states.insert(states.end(), agent.future.states.begin(), agent.future.states.end());
  return states;
}

double net_heading_change(const std::vector<AgentState>& states) {
  double turned = 0.0;
  for (std::size_t k = 1; k < states.size(); ++k) {
    turned += wrap(heading_of(states[k].v) - heading_of(states[k - 1].v));
  }
  return turned;
}

std::vector<double> curvatures(const std::vector<AgentState>& states) {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) {
    const double speed = norm(s.v);
    out.push_back(speed > 0.0 ? (s.v.x * s.u.y - s.v.y * s.u.x) / (speed * speed * speed) : 0.0);
  }
  return out;
}

bool curvature_sign_monotone(const std::vector<AgentState>& states, double threshold) {
  int seen = 0;
  for (double k : curvatures(states)) {
    if (std::abs(k) <= threshold) continue;
    const int sign = k > 0.0 ? 1 : -1;
    if (seen != 0 && sign != seen) return false;
    seen = sign;
  }
  return true;
}

bool matches_family(const Scene& scene, Family family) {
  const auto states = full_track(scene.agents.at(scene.target));
  if (family == Family::kLeftTurn) return net_heading_change(states) > 45.0 * kDeg;
  return curvature_sign_monotone(states);
}

}  // namespace smoothtraj
