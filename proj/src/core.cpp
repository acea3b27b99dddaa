#include "smoothtraj/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace smoothtraj {

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

double norm_inf(Vec2 v) { return std::max(std::abs(v.x), std::abs(v.y)); }

bool is_finite(const AgentState& s) {
  return std::isfinite(s.p.x) && std::isfinite(s.p.y) && std::isfinite(s.v.x) &&
         std::isfinite(s.v.y) && std::isfinite(s.u.x) && std::isfinite(s.u.y);
}

std::vector<Vec2> Trajectory::positions() const {
  std::vector<Vec2> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.p);
  return out;
}

PhiStep step_phi(const AgentState& state, double dt) {
  if (!is_finite(state) || !std::isfinite(dt)) {
    throw std::domain_error("step_phi: non-finite state or timestep");
  }
  if (dt <= 0.0) throw std::domain_error("step_phi: dt must be positive");
  const Vec2 v{state.v.x + state.u.x * dt, state.v.y + state.u.y * dt};
  const Vec2 p{state.p.x + v.x * dt, state.p.y + v.y * dt};
  return {p, v};
}

Trajectory rollout(const ControlSequence& controls, double dt, int t0) {
  if (controls.u.empty()) throw std::invalid_argument("rollout: empty control sequence");
  Trajectory out;
  out.dt = dt;
  out.t0 = t0;
  out.states.reserve(controls.u.size());
  out.states.push_back({controls.p0, controls.v0, controls.u[0]});
  for (std::size_t k = 1; k < controls.u.size(); ++k) {
    const auto [p, v] = step_phi(out.states.back(), dt);
    out.states.push_back({p, v, controls.u[k]});
  }
  if (!is_finite(out.states.front())) throw std::domain_error("rollout: non-finite controls");
  return out;
}

namespace {

double step_residual(const AgentState& prev, const AgentState& next, double dt) {
  const auto [p, v] = step_phi(prev, dt);
  return std::max(norm_inf(p - next.p), norm_inf(v - next.v));
}

}  // namespace

double consistency_residual(const Trajectory& trajectory) {
  double worst = 0.0;
  for (std::size_t k = 1; k < trajectory.size(); ++k) {
    worst = std::max(worst, step_residual(trajectory[k - 1], trajectory[k], trajectory.dt));
  }
  return worst;
}

ControlSequence inverse_controls(const Trajectory& trajectory, double tolerance) {
  if (trajectory.states.empty()) throw std::invalid_argument("inverse_controls: empty trajectory");
  for (std::size_t k = 1; k < trajectory.size(); ++k) {
    const double r = step_residual(trajectory[k - 1], trajectory[k], trajectory.dt);
    if (!(r <= tolerance)) {
      std::ostringstream msg;
      msg << "inverse_controls: trajectory inconsistent with the dynamics at step " << k
          << " (residual " << r << ")";
      throw std::domain_error(msg.str());
    }
  }
  ControlSequence out;
  out.p0 = trajectory[0].p;
  out.v0 = trajectory[0].v;
  out.u.reserve(trajectory.size());
  for (const auto& s : trajectory.states) out.u.push_back(s.u);
  return out;
}

void validate(const Scene& scene) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid scene: " + what); };
  if (scene.H <= 0 || scene.T <= 0) fail("H and T must be positive");
  if (!(scene.dt > 0.0) || !std::isfinite(scene.dt)) fail("dt must be positive");
  if (scene.agents.size() < 2) fail("need at least two agents");
  if (scene.target >= scene.agents.size()) fail("target index out of range");
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    const auto& a = scene.agents[i];
    const std::string who = "agent " + std::to_string(i);
    if (a.past.size() != static_cast<std::size_t>(scene.H)) fail(who + " past length != H");
    if (a.future.size() != static_cast<std::size_t>(scene.T)) fail(who + " future length != T");
    if (a.past.dt != scene.dt || a.future.dt != scene.dt) fail(who + " dt mismatch");
    for (const auto* traj : {&a.past, &a.future}) {
      for (const auto& s : traj->states) {
        if (!is_finite(s)) fail(who + " has non-finite state");
      }
    }
    if (consistency_residual(a.past) > kConsistencyTolerance) fail(who + " past is not kinematically consistent");
  }
}

std::vector<std::vector<double>> to_rows(const Trajectory& trajectory) {
  std::vector<std::vector<double>> rows;
  rows.reserve(trajectory.size());
  for (const auto& s : trajectory.states) {
    rows.push_back({s.p.x, s.p.y, s.v.x, s.v.y, s.u.x, s.u.y});
  }
  return rows;
}

Trajectory from_rows(const std::vector<std::vector<double>>& rows, double dt, int t0) {
  Trajectory out;
  out.dt = dt;
  out.t0 = t0;
  out.states.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != kStateDim) throw std::invalid_argument("state row must have 6 components");
    out.states.push_back({{r[0], r[1]}, {r[2], r[3]}, {r[4], r[5]}});
  }
  return out;
}

nlohmann::ordered_json scene_to_json(const Scene& scene) {
  nlohmann::ordered_json j;
  j["dt"] = scene.dt;
  j["H"] = scene.H;
  j["T"] = scene.T;
  j["target"] = scene.target;
  auto agents = nlohmann::ordered_json::array();
  for (const auto& a : scene.agents) {
    nlohmann::ordered_json aj;
    aj["past"] = to_rows(a.past);
    aj["future"] = to_rows(a.future);
    agents.push_back(std::move(aj));
  }
  j["agents"] = std::move(agents);
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  s.dt = j.at("dt").get<double>();
  s.H = j.at("H").get<int>();
  s.T = j.at("T").get<int>();
  s.target = j.at("target").get<std::size_t>();
  for (const auto& aj : j.at("agents")) {
    AgentTrack a;
    a.past = from_rows(aj.at("past").get<std::vector<std::vector<double>>>(), s.dt, -(s.H - 1));
    a.future = from_rows(aj.at("future").get<std::vector<std::vector<double>>>(), s.dt, 1);
    s.agents.push_back(std::move(a));
  }
  validate(s);
  return s;
}

std::vector<Scene> read_scenes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Scene> scenes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      scenes.push_back(scene_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return scenes;
}

void write_scenes(std::span<const Scene> scenes, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : scenes) out << scene_to_json(s).dump() << '\n';
}

}  // namespace smoothtraj
