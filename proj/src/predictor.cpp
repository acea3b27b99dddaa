#include "smoothtraj/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "smoothtraj/parallel.hpp"
#include "smoothtraj/rng.hpp"
#include "smoothtraj/smoothing.hpp"

namespace smoothtraj {

namespace {

constexpr double kInvScale = 1.0 / kFeatureScale;

struct Layout {
  std::size_t w1, b1, w2, b2, w3, b3, end;
};

Layout layout(const ModelDims& d) {
  const std::size_t in = d.input_dim();
  const std::size_t w = static_cast<std::size_t>(d.width);
  const std::size_t out = d.output_dim();
  Layout l{};
  l.w1 = 0;
  l.b1 = l.w1 + w * in;
  l.w2 = l.b1 + w;
  l.b2 = l.w2 + w * w;
  l.w3 = l.b2 + w;
  l.b3 = l.w3 + out * w;
  l.end = l.b3 + out;
  return l;
}

void check_dims(const ModelParams& params, const Scene& scene, const Trajectory& target_past) {
  const auto& d = params.dims;
  if (params.theta.size() != d.param_count()) {
    throw std::invalid_argument("predict: parameter vector does not match architecture");
  }
  if (static_cast<int>(scene.agents.size()) != d.agents || scene.H != d.H || scene.T != d.T) {
    throw std::invalid_argument("predict: scene dimensions do not match the model");
  }
  if (target_past.size() != static_cast<std::size_t>(d.H)) {
    throw std::invalid_argument("predict: target past length must equal H");
  }
}

std::vector<std::size_t> order_around(const Scene& scene, Vec2 origin) {
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    if (i != scene.target) others.push_back(i);
  }
  std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
    return norm(scene.agents[a].past.back().p - origin) < norm(scene.agents[b].past.back().p - origin);
  });
  others.insert(others.begin(), scene.target);
  return others;
}

// Dense layer with bias-first accumulation; the tape path mirrors this order.
void dense(std::span<const double> theta, std::size_t w_off, std::size_t b_off, std::span<const double> in,
           std::span<double> out, bool activate) {
  const std::size_t n_in = in.size();
  for (std::size_t j = 0; j < out.size(); ++j) {
    double acc = theta[b_off + j];
    const double* row = theta.data() + w_off + j * n_in;
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
    out[j] = activate ? std::tanh(acc) : acc;
  }
}

std::vector<ad::Var> dense_on_tape(std::span<const ad::Var> theta, std::size_t w_off, std::size_t b_off,
                                   std::span<const ad::Var> in, std::size_t n_out, bool activate) {
  std::vector<ad::Var> out;
  out.reserve(n_out);
  const std::size_t n_in = in.size();
  for (std::size_t j = 0; j < n_out; ++j) {
    ad::Var acc = ad::affine(theta.subspan(w_off + j * n_in, n_in), in, theta[b_off + j]);
    out.push_back(activate ? ad::tanh(acc) : acc);
  }
  return out;
}

}  // namespace

std::string to_string(SmoothingGoal goal) { return goal == SmoothingGoal::kPosition ? "pos" : "ctrl"; }

SmoothingGoal parse_goal(const std::string& text) {
  if (text == "pos") return SmoothingGoal::kPosition;
  if (text == "ctrl") return SmoothingGoal::kControl;
  throw std::invalid_argument("unknown smoothing goal '" + text + "' (expected pos or ctrl)");
}

std::size_t ModelDims::param_count() const { return layout(*this).end; }

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  if (dims.agents < 1 || dims.H < 1 || dims.T < 1 || dims.width < 1 || dims.heads < 1) {
    throw std::invalid_argument("init_params: all dimensions must be positive");
  }
  ModelParams params;
  params.dims = dims;
  params.seed = seed;
  const Layout l = layout(dims);
  params.theta.assign(l.end, 0.0);
  Rng rng = make_stream(seed, {0x1417});
  auto fill = [&](std::size_t begin, std::size_t end, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = begin; i < end; ++i) params.theta[i] = dist(rng);
  };
  fill(l.w1, l.b1, dims.input_dim());
  fill(l.w2, l.b2, static_cast<std::size_t>(dims.width));
  fill(l.w3, l.b3, static_cast<std::size_t>(dims.width));
  return params;
}

std::vector<std::size_t> agent_order(const Scene& scene) {
  return order_around(scene, scene.target_past().back().p);
}

PredictionSet predict(const ModelParams& params, const Scene& scene) {
  return predict(params, scene, scene.target_past());
}

PredictionSet predict(const ModelParams& params, const Scene& scene, const Trajectory& target_past) {
  check_dims(params, scene, target_past);
  const auto& d = params.dims;
  const Layout l = layout(d);
  const Vec2 origin = target_past.back().p;

  std::vector<double> x;
  x.reserve(d.input_dim());
  for (std::size_t a : order_around(scene, origin)) {
    const Trajectory& past = a == scene.target ? target_past : scene.agents[a].past;
    for (const auto& s : past.states) {
      x.push_back((s.p.x - origin.x) * kInvScale);
      x.push_back((s.p.y - origin.y) * kInvScale);
      x.push_back(s.v.x * kInvScale);
      x.push_back(s.v.y * kInvScale);
    }
  }

  const auto w = static_cast<std::size_t>(d.width);
  std::vector<double> h1(w), h2(w), out(d.output_dim());
  dense(params.theta, l.w1, l.b1, x, h1, true);
  dense(params.theta, l.w2, l.b2, h1, h2, true);
  dense(params.theta, l.w3, l.b3, h2, out, false);

  PredictionSet pred;
  pred.heads.resize(static_cast<std::size_t>(d.heads));
  for (std::size_t k = 0; k < pred.heads.size(); ++k) {
    auto& head = pred.heads[k];
    head.reserve(static_cast<std::size_t>(d.T));
    for (int t = 0; t < d.T; ++t) {
      const std::size_t o = (k * static_cast<std::size_t>(d.T) + static_cast<std::size_t>(t)) * 2;
      head.push_back({origin.x + out[o] * kFeatureScale, origin.y + out[o + 1] * kFeatureScale});
    }
  }
  return pred;
}

TapePast to_tape(ad::Tape& tape, const Trajectory& past) {
  TapePast out;
  out.p.reserve(past.size());
  out.v.reserve(past.size());
  for (const auto& s : past.states) {
    out.p.push_back({tape.variable(s.p.x), tape.variable(s.p.y)});
    out.v.push_back({tape.variable(s.v.x), tape.variable(s.v.y)});
  }
  return out;
}

std::vector<std::vector<VarPoint>> predict_on_tape(ad::Tape& tape, const ModelDims& d,
                                                    std::span<const ad::Var> theta, const Scene& scene,
                                                    const TapePast& target_past) {
  if (theta.size() != d.param_count()) throw std::invalid_argument("predict_on_tape: bad parameter count");
  if (static_cast<int>(scene.agents.size()) != d.agents || scene.H != d.H || scene.T != d.T ||
      target_past.p.size() != static_cast<std::size_t>(d.H) || target_past.v.size() != target_past.p.size()) {
    throw std::invalid_argument("predict_on_tape: scene dimensions do not match the model");
  }
  const Layout l = layout(d);
  const VarPoint origin = target_past.p.back();

  std::vector<ad::Var> x;
  x.reserve(d.input_dim());
  for (std::size_t a : order_around(scene, {origin.x.value, origin.y.value})) {
    if (a == scene.target) {
      for (std::size_t k = 0; k < target_past.p.size(); ++k) {
        x.push_back((target_past.p[k].x - origin.x) * kInvScale);
        x.push_back((target_past.p[k].y - origin.y) * kInvScale);
        x.push_back(target_past.v[k].x * kInvScale);
        x.push_back(target_past.v[k].y * kInvScale);
      }
    } else {
      for (const auto& s : scene.agents[a].past.states) {
        x.push_back((tape.variable(s.p.x) - origin.x) * kInvScale);
        x.push_back((tape.variable(s.p.y) - origin.y) * kInvScale);
        x.push_back(tape.variable(s.v.x) * kInvScale);
        x.push_back(tape.variable(s.v.y) * kInvScale);
      }
    }
  }

  const auto w = static_cast<std::size_t>(d.width);
  const auto h1 = dense_on_tape(theta, l.w1, l.b1, x, w, true);
  const auto h2 = dense_on_tape(theta, l.w2, l.b2, h1, w, true);
  const auto out = dense_on_tape(theta, l.w3, l.b3, h2, d.output_dim(), false);

  std::vector<std::vector<VarPoint>> heads(static_cast<std::size_t>(d.heads));
  for (std::size_t k = 0; k < heads.size(); ++k) {
    heads[k].reserve(static_cast<std::size_t>(d.T));
    for (int t = 0; t < d.T; ++t) {
      const std::size_t o = (k * static_cast<std::size_t>(d.T) + static_cast<std::size_t>(t)) * 2;
      heads[k].push_back({origin.x + out[o] * kFeatureScale, origin.y + out[o + 1] * kFeatureScale});
    }
  }
  return heads;
}

ad::Var loss_min_ade(const std::vector<std::vector<VarPoint>>& prediction, const Trajectory& truth) {
  if (prediction.empty()) throw std::invalid_argument("loss_min_ade: empty prediction");
  std::optional<ad::Var> best;
  for (const auto& head : prediction) {
    if (head.size() != truth.size()) throw std::invalid_argument("loss_min_ade: horizon mismatch");
    std::vector<ad::Var> errors;
    errors.reserve(head.size());
    for (std::size_t t = 0; t < head.size(); ++t) {
      const auto& q = truth[t].p;
      errors.push_back(ad::sqrt(ad::square(head[t].x - q.x) + ad::square(head[t].y - q.y)));
    }
    const ad::Var ade = ad::sum(errors) / static_cast<double>(head.size());
    best = best ? ad::min(*best, ade) : ade;
  }
  return *best;
}

namespace {

double example_gradient_on(ad::Tape& tape, const ModelParams& params, const Scene& scene,
                           const Trajectory& target_past, std::vector<double>& gradient) {
  tape.clear();
  const auto theta = tape.variables(params.theta);
  const auto past = to_tape(tape, target_past);
  const auto pred = predict_on_tape(tape, params.dims, theta, scene, past);
  const ad::Var loss = loss_min_ade(pred, scene.target_future());
  gradient = tape.gradient(loss, theta);
  return loss.value;
}

}  // namespace

double example_gradient(const ModelParams& params, const Scene& scene, const Trajectory& target_past,
                        std::vector<double>& gradient) {
  check_dims(params, scene, target_past);
  ad::Tape tape;
  return example_gradient_on(tape, params, scene, target_past, gradient);
}

ModelParams train(std::span<const Scene> scenes, const TrainConfig& cfg) {
  return train(scenes, cfg, init_params(cfg.dims, cfg.seed));
}

ModelParams train(std::span<const Scene> scenes, const TrainConfig& cfg, ModelParams params) {
  if (scenes.empty()) throw std::invalid_argument("train: empty training set");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.learning_rate < 0.0) {
    throw std::invalid_argument("train: epochs >= 0, batch_size >= 1 and learning_rate >= 0 required");
  }
  if (!(params.dims == cfg.dims)) throw std::invalid_argument("train: initial parameters have other dims");
  if (cfg.smoothing && cfg.smoothing->sigma < 0.0) throw std::invalid_argument("train: sigma must be >= 0");
  for (const auto& s : scenes) check_dims(params, s, s.target_past());

  params.seed = cfg.seed;
  params.trained_with = cfg.smoothing;
  const std::size_t q = params.theta.size();
  std::vector<double> m(q, 0.0), v(q, 0.0), grad_sum(q);
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::vector<double>> grads(batch);
  std::vector<double> losses(batch);
  std::vector<ad::Tape> tapes(static_cast<std::size_t>(worker_threads()));
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = make_stream(cfg.seed, {1, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
      const std::size_t n = std::min(batch, order.size() - start);
      parallel_for(n, [&](std::size_t i) {
#ifdef _OPENMP
        ad::Tape& tape = tapes[static_cast<std::size_t>(omp_get_thread_num()) % tapes.size()];
#else
        ad::Tape& tape = tapes[0];
#endif
        const std::size_t idx = order[start + i];
        const Scene& scene = scenes[idx];
        if (cfg.smoothing) {
          Rng rng = make_stream(cfg.seed, {2, static_cast<std::uint64_t>(epoch), idx});
          const Trajectory noisy = perturb_input(scene.target_past(), cfg.smoothing->goal, cfg.smoothing->sigma, rng);
          losses[i] = example_gradient_on(tape, params, scene, noisy, grads[i]);
        } else {
          losses[i] = example_gradient_on(tape, params, scene, scene.target_past(), grads[i]);
        }
      });

      std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        batch_loss += losses[i];
        for (std::size_t j = 0; j < q; ++j) grad_sum[j] += grads[i][j];
      }
      if (std::isnan(batch_loss)) {
        throw std::runtime_error("train: NaN loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index));
      }
      epoch_loss += batch_loss;

      ++step;
      const double inv_n = 1.0 / static_cast<double>(n);
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t j = 0; j < q; ++j) {
        const double g = grad_sum[j] * inv_n;
        m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
        v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
        params.theta[j] -= cfg.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.epsilon);
      }
    }
    params.loss_trace.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "smoothtraj-mlp-v1";
  j["dims"] = {{"agents", params.dims.agents},
               {"H", params.dims.H},
               {"T", params.dims.T},
               {"width", params.dims.width},
               {"heads", params.dims.heads}};
  j["seed"] = params.seed;
  if (params.trained_with) {
    j["smoothing"] = {{"goal", to_string(params.trained_with->goal)}, {"sigma", params.trained_with->sigma}};
  } else {
    j["smoothing"] = nullptr;
  }
  j["theta"] = params.theta;
  j["loss_trace"] = params.loss_trace;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "smoothtraj-mlp-v1") {
    throw std::runtime_error("bad checkpoint " + path.string() + ": unknown format");
  }
  ModelParams p;
  const auto& d = j.at("dims");
  p.dims = {d.at("agents").get<int>(), d.at("H").get<int>(), d.at("T").get<int>(), d.at("width").get<int>(),
            d.at("heads").get<int>()};
  p.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("smoothing").is_null()) {
    p.trained_with = TrainSmoothing{parse_goal(j["smoothing"].at("goal").get<std::string>()),
                                    j["smoothing"].at("sigma").get<double>()};
  }
  p.theta = j.at("theta").get<std::vector<double>>();
  p.loss_trace = j.value("loss_trace", std::vector<double>{});
  if (p.theta.size() != p.dims.param_count()) {
    throw std::runtime_error("bad checkpoint " + path.string() + ": parameter count mismatch");
  }
  return p;
}

}  // namespace smoothtraj
