#include "smoothtraj/smoothing.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "smoothtraj/parallel.hpp"

namespace smoothtraj {

double sigma_ctrl(double sigma, int H, double dt) {
  if (H < 1 || !(dt > 0.0) || sigma < 0.0) {
    throw std::invalid_argument("sigma_ctrl: need H >= 1, dt > 0, sigma >= 0");
  }
  const double h = static_cast<double>(H);
  return sigma * std::sqrt(3.0) / (std::sqrt(h * h * h) * dt * dt);
}

NoiseSpec noise_spec(SmoothingGoal goal, double sigma, int H, double dt) {
  NoiseSpec spec;
  if (goal == SmoothingGoal::kPosition) {
    spec.position_std = sigma;
  } else {
    spec.control_std = sigma_ctrl(sigma, H, dt);
  }
  return spec;
}

Trajectory perturb_input(const Trajectory& past, SmoothingGoal goal, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("perturb_input: sigma must be non-negative");
  if (sigma == 0.0) return past;
  const NoiseSpec spec = noise_spec(goal, sigma, static_cast<int>(past.size()), past.dt);
  if (goal == SmoothingGoal::kPosition) {
    std::normal_distribution<double> noise(0.0, spec.position_std);
    Trajectory out = past;
    for (auto& s : out.states) {
      s.p.x += noise(rng);
      s.p.y += noise(rng);
    }
    return out;
  }
  std::normal_distribution<double> noise(0.0, spec.control_std);
  ControlSequence controls = inverse_controls(past);
  for (auto& u : controls.u) {
    u.x += noise(rng);
    u.y += noise(rng);
  }
  return rollout(controls, past.dt, past.t0);
}

namespace {

PredictionSet noisy_pass(const PredictorFn& predictor, const Scene& scene, const Trajectory& target_past,
                         const SmoothingConfig& cfg, std::size_t sample) {
  Rng rng = make_stream(cfg.seed, {sample});
  return predictor(scene, perturb_input(target_past, cfg.goal, cfg.sigma, rng));
}

// Running mean in sample order; a constant sequence reproduces itself exactly.
PredictionSet ordered_mean(const std::vector<PredictionSet>& passes) {
  PredictionSet mean = passes.front();
  for (std::size_t i = 1; i < passes.size(); ++i) {
    const auto& pass = passes[i];
    if (pass.num_heads() != mean.num_heads() || pass.horizon() != mean.horizon()) {
      throw std::runtime_error("smooth_predict: predictor changed its output shape");
    }
    const double w = 1.0 / static_cast<double>(i + 1);
    for (std::size_t k = 0; k < mean.heads.size(); ++k) {
      for (std::size_t t = 0; t < mean.heads[k].size(); ++t) {
        Vec2& m = mean.heads[k][t];
        const Vec2 x = pass.heads[k][t];
        m.x += (x.x - m.x) * w;
        m.y += (x.y - m.y) * w;
      }
    }
  }
  return mean;
}

void check(const SmoothingConfig& cfg) {
  if (cfg.n_samples < 1) throw std::invalid_argument("smooth_predict: n_samples must be >= 1");
  if (cfg.sigma < 0.0) throw std::invalid_argument("smooth_predict: sigma must be >= 0");
}

}  // namespace

PredictionSet smooth_predict(const PredictorFn& predictor, const Scene& scene, const Trajectory& target_past,
                             const SmoothingConfig& cfg) {
  check(cfg);
  std::vector<PredictionSet> passes(static_cast<std::size_t>(cfg.n_samples));
  parallel_for(passes.size(), [&](std::size_t i) {
    passes[i] = noisy_pass(predictor, scene, target_past, cfg, i);
  });
  return ordered_mean(passes);
}

PredictionSet smooth_predict_serial(const PredictorFn& predictor, const Scene& scene,
                                    const Trajectory& target_past, const SmoothingConfig& cfg) {
  check(cfg);
  std::vector<PredictionSet> passes(static_cast<std::size_t>(cfg.n_samples));
  serial_for(passes.size(), [&](std::size_t i) {
    passes[i] = noisy_pass(predictor, scene, target_past, cfg, i);
  });
  return ordered_mean(passes);
}

PredictionSet smooth_predict(const ModelParams& params, const Scene& scene, const SmoothingConfig& cfg) {
  return smooth_predict(params, scene, scene.target_past(), cfg);
}

PredictionSet smooth_predict(const ModelParams& params, const Scene& scene, const Trajectory& target_past,
                             const SmoothingConfig& cfg) {
  const PredictorFn base = [&params](const Scene& s, const Trajectory& past) {
    return predict(params, s, past);
  };
  return smooth_predict(base, scene, target_past, cfg);
}

}  // namespace smoothtraj
