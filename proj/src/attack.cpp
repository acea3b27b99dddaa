#include "smoothtraj/attack.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "smoothtraj/metrics.hpp"
#include "smoothtraj/parallel.hpp"

namespace smoothtraj {

namespace {

constexpr double kScaleTolerance = 1e-6;

ControlSequence add(const ControlSequence& controls, std::span<const Vec2> delta_u, double scale) {
  ControlSequence out = controls;
  for (std::size_t k = 0; k < out.u.size(); ++k) out.u[k] = out.u[k] + delta_u[k] * scale;
  return out;
}

double displacement(const std::vector<Vec2>& base, const ControlSequence& controls, std::span<const Vec2> delta_u,
                    double scale, double dt) {
  const auto moved = rollout(add(controls, delta_u, scale), dt).positions();
  double worst = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k) worst = std::max(worst, norm_inf(moved[k] - base[k]));
  return worst;
}

bool all_zero(std::span<const Vec2> delta_u) {
  for (const auto& d : delta_u) {
    if (d.x != 0.0 || d.y != 0.0) return false;
  }
  return true;
}

// Differentiable rollout of (p0, v0, u + delta) for the attacked target.
TapePast rollout_on_tape(ad::Tape& tape, const ControlSequence& controls, std::span<const ad::Var> delta,
                         double dt) {
  TapePast past;
  const std::size_t h = controls.u.size();
  past.p.reserve(h);
  past.v.reserve(h);
  past.p.push_back({tape.variable(controls.p0.x), tape.variable(controls.p0.y)});
  past.v.push_back({tape.variable(controls.v0.x), tape.variable(controls.v0.y)});
  for (std::size_t k = 1; k < h; ++k) {
    const ad::Var ux = delta[2 * (k - 1)] + controls.u[k - 1].x;
    const ad::Var uy = delta[2 * (k - 1) + 1] + controls.u[k - 1].y;
    const VarPoint v{past.v.back().x + ux * dt, past.v.back().y + uy * dt};
    const VarPoint p{past.p.back().x + v.x * dt, past.p.back().y + v.y * dt};
    past.v.push_back(v);
    past.p.push_back(p);
  }
  return past;
}

double sign(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

}  // namespace

double step_size(const AttackConfig& cfg, double dt) {
  if (cfg.alpha) return *cfg.alpha;
  return cfg.d_max / (5.0 * std::max(cfg.iterations, 1) * dt * dt);
}

double max_displacement(const ControlSequence& controls, std::span<const Vec2> delta_u, double dt) {
  if (delta_u.size() != controls.u.size()) throw std::invalid_argument("max_displacement: shape mismatch");
  return displacement(rollout(controls, dt).positions(), controls, delta_u, 1.0, dt);
}

double feasible_scale(std::span<const Vec2> delta_u, const ControlSequence& controls, double dt, double d_max) {
  if (delta_u.size() != controls.u.size()) throw std::invalid_argument("project_feasible: shape mismatch");
  if (all_zero(delta_u)) return 1.0;
  const auto base = rollout(controls, dt).positions();
  if (displacement(base, controls, delta_u, 1.0, dt) <= d_max) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > kScaleTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (displacement(base, controls, delta_u, mid, dt) <= d_max) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::vector<Vec2> project_feasible(std::span<const Vec2> delta_u, const ControlSequence& controls, double dt,
                                   double d_max) {
  const double s = feasible_scale(delta_u, controls, dt, d_max);
  std::vector<Vec2> out(delta_u.begin(), delta_u.end());
  if (s != 1.0) {
    for (auto& d : out) d = d * s;
  }
  return out;
}

double control_loss_gradient(const ModelParams& params, const Scene& scene, const ControlSequence& controls,
                             std::span<const Vec2> delta_u, std::vector<double>& gradient) {
  if (delta_u.size() != controls.u.size()) throw std::invalid_argument("control_loss_gradient: shape mismatch");
  ad::Tape tape;
  const auto theta = tape.variables(params.theta);
  std::vector<ad::Var> dvars;
  dvars.reserve(2 * delta_u.size());
  for (const auto& d : delta_u) {
    dvars.push_back(tape.variable(d.x));
    dvars.push_back(tape.variable(d.y));
  }
  const TapePast past = rollout_on_tape(tape, controls, dvars, scene.dt);
  const ad::Var loss = loss_min_ade(predict_on_tape(tape, params.dims, theta, scene, past), scene.target_future());
  gradient = tape.gradient(loss, dvars);
  return loss.value;
}

AttackResult pgd_attack(const ModelParams& params, const Scene& scene, const AttackConfig& cfg) {
  if (!(cfg.d_max > 0.0)) throw std::invalid_argument("pgd_attack: d_max must be positive");
  if (cfg.iterations < 0) throw std::invalid_argument("pgd_attack: iterations must be >= 0");
  const double alpha = step_size(cfg, scene.dt);
  if (!(alpha > 0.0)) throw std::invalid_argument("pgd_attack: step size must be positive");

  const Trajectory& original = scene.target_past();
  const Trajectory& truth = scene.target_future();
  const ControlSequence controls = inverse_controls(original);
  const std::size_t h = controls.u.size();

  AttackResult result;
  result.delta_u.assign(h, Vec2{});
  result.ade_before = min_ade(predict(params, scene, original), truth);
  result.ade_after = result.ade_before;

  std::vector<Vec2> delta(h, Vec2{});
  std::vector<double> grad;
  for (int m = 0; m < cfg.iterations; ++m) {
    control_loss_gradient(params, scene, controls, delta, grad);

    bool finite = true;
    for (double g : grad) finite = finite && std::isfinite(g);
    if (!finite) {
      result.aborted = true;
      break;
    }

    std::vector<Vec2> stepped(h);
    for (std::size_t k = 0; k < h; ++k) {
      // L = -minADE is minimized, so step along the sign of +grad(minADE).
      stepped[k] = {delta[k].x + alpha * sign(grad[2 * k]), delta[k].y + alpha * sign(grad[2 * k + 1])};
    }
    delta = project_feasible(stepped, controls, scene.dt, cfg.d_max);
    result.iterations_run = m + 1;

    const double score = min_ade(predict(params, scene, rollout(add(controls, delta, 1.0), scene.dt, original.t0)), truth);
    if (score > result.ade_after) {
      result.ade_after = score;
      result.delta_u = delta;
    }
  }

  result.perturbed_past =
      all_zero(result.delta_u) ? original : rollout(add(controls, result.delta_u, 1.0), scene.dt, original.t0);
  return result;
}

std::vector<AttackedScene> attack_all(const ModelParams& params, std::span<const Scene> scenes,
                                      const AttackConfig& cfg, const std::string& id_prefix) {
  std::vector<AttackedScene> out(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    const AttackResult r = pgd_attack(params, scenes[i], cfg);
    auto& a = out[i];
    a.id = fmt::format("{}-{:05d}", id_prefix, i);
    a.scene = scenes[i];
    a.perturbed_past = r.perturbed_past;
    a.d_max = cfg.d_max;
    a.iterations = cfg.iterations;
    a.ade_before = r.ade_before;
    a.ade_after = r.ade_after;
    a.iterations_run = r.iterations_run;
  });
  return out;
}

AttackedScene benign(const Scene& scene, std::string id) {
  AttackedScene a;
  a.id = std::move(id);
  a.scene = scene;
  a.perturbed_past = scene.target_past();
  return a;
}

void write_attacked_scenes(std::span<const AttackedScene> scenes, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& a : scenes) {
    nlohmann::ordered_json j = scene_to_json(a.scene);
    j["id"] = a.id;
    j["perturbed_past"] = to_rows(a.perturbed_past);
    j["attack"] = {{"d_max", a.d_max},
                   {"iterations", a.iterations},
                   {"ade_before", a.ade_before},
                   {"ade_after", a.ade_after},
                   {"iterations_run", a.iterations_run}};
    out << j.dump() << '\n';
  }
}

std::vector<AttackedScene> read_attacked_scenes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<AttackedScene> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AttackedScene a = benign(scene_from_json(j), j.value("id", fmt::format("scene-{:05d}", out.size())));
      if (j.contains("perturbed_past")) {
        a.perturbed_past = from_rows(j["perturbed_past"].get<std::vector<std::vector<double>>>(), a.scene.dt,
                                     a.scene.target_past().t0);
        if (a.perturbed_past.size() != static_cast<std::size_t>(a.scene.H)) {
          throw std::invalid_argument("perturbed_past length must equal H");
        }
      }
      if (j.contains("attack")) {
        const auto& m = j["attack"];
        a.d_max = m.at("d_max").get<double>();
        a.iterations = m.at("iterations").get<int>();
        a.ade_before = m.at("ade_before").get<double>();
        a.ade_after = m.at("ade_after").get<double>();
        a.iterations_run = m.at("iterations_run").get<int>();
      }
      out.push_back(std::move(a));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace smoothtraj
