#include "smoothtraj/predictor.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "gtest/gtest.h"
#include "smoothtraj/metrics.hpp"
#include "test_util.hpp"

namespace smoothtraj {
namespace {

ModelParams random_model(std::uint64_t seed, int heads = 6) {
  ModelDims dims;
  dims.width = 16;
  dims.heads = heads;
  return init_params(dims, seed);
}

Scene shifted(Scene s, Vec2 by) {
  for (auto& a : s.agents) {
    for (auto& st : a.past.states) st.p = st.p + by;
    for (auto& st : a.future.states) st.p = st.p + by;
  }
  return s;
}

double cv_ade(const Scene& s) {
  const AgentState last = s.target_past().states.back();
  const auto& future = s.target_future();
  double total = 0.0;
  for (std::size_t t = 0; t < future.size(); ++t) {
    const Vec2 guess = last.p + last.v * (s.dt * static_cast<double>(t + 1));
    total += norm(future[t].p - guess);
  }
  return total / static_cast<double>(future.size());
}

// Trained once, shared by the tests that need a fitted model.
class TrainedModel : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto scenes = testing::straight_scenes(17, 256);
    TrainConfig cfg;
    cfg.dims.width = 32;
    cfg.epochs = 120;
    cfg.batch_size = 32;
    cfg.seed = 5;
    model_ = new ModelParams(train(scenes, cfg));
  }
  static void TearDownTestSuite() {
    delete model_;
    model_ = nullptr;
  }
  static ModelParams* model_;
};

ModelParams* TrainedModel::model_ = nullptr;

TEST(Predict, ZeroWeightsGiveBiasTrajectory) {
  ModelParams params = random_model(1, 2);
  std::fill(params.theta.begin(), params.theta.end(), 0.0);
  const std::size_t out = params.dims.output_dim();
  const std::size_t b3 = params.theta.size() - out;
  for (std::size_t i = 0; i < out; ++i) params.theta[b3 + i] = 0.01 * static_cast<double>(i);

  const Scene s = testing::straight_scene({3, -2}, {5, 1}, {0.2, 0});
  const Vec2 origin = s.target_past().states.back().p;
  const auto pred = predict(params, s);
  ASSERT_EQ(pred.heads.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    for (int t = 0; t < s.T; ++t) {
      const std::size_t o = (k * 12 + static_cast<std::size_t>(t)) * 2;
      EXPECT_DOUBLE_EQ(pred.heads[k][t].x, origin.x + kFeatureScale * params.theta[b3 + o]);
      EXPECT_DOUBLE_EQ(pred.heads[k][t].y, origin.y + kFeatureScale * params.theta[b3 + o + 1]);
    }
  }
}

TEST(Predict, TranslationEquivariance) {
  const ModelParams params = random_model(2);
  const Scene s = testing::straight_scene({1, 2}, {6, 0.5}, {-0.3, 0.1});
  const auto a = predict(params, s);
  const auto b = predict(params, shifted(s, {10, -3}));
  for (std::size_t k = 0; k < a.heads.size(); ++k) {
    for (std::size_t t = 0; t < a.heads[k].size(); ++t) {
      EXPECT_NEAR(b.heads[k][t].x, a.heads[k][t].x + 10.0, 1e-9);
      EXPECT_NEAR(b.heads[k][t].y, a.heads[k][t].y - 3.0, 1e-9);
    }
  }
}

TEST(Predict, PureAcrossCalls) {
  const ModelParams params = random_model(3);
  const Scene s = testing::straight_scene({0, 0}, {4, 0}, {0, 0});
  EXPECT_EQ(predict(params, s), predict(params, s));
}

TEST(Predict, RejectsDimensionMismatch) {
  const ModelParams params = random_model(4);
  const Scene s = testing::straight_scene({0, 0}, {4, 0}, {0, 0}, 8, 12);
  EXPECT_THROW(predict(params, s), std::invalid_argument);
}

TEST(Predict, TapeMatchesDoublePath) {
  const ModelParams params = random_model(6);
  const Scene s = testing::straight_scene({1, 1}, {5, -1}, {0.4, 0.2});
  ad::Tape tape;
  const auto theta = tape.variables(params.theta);
  const auto heads = predict_on_tape(tape, params.dims, theta, s, to_tape(tape, s.target_past()));
  const auto pred = predict(params, s);
  for (std::size_t k = 0; k < heads.size(); ++k) {
    for (std::size_t t = 0; t < heads[k].size(); ++t) {
      EXPECT_EQ(heads[k][t].x.value, pred.heads[k][t].x);
      EXPECT_EQ(heads[k][t].y.value, pred.heads[k][t].y);
    }
  }
}

TEST(Predict, DuplicatedHeadDoesNotChangeMinAde) {
  ModelParams one = random_model(8, 1);
  ModelParams two = random_model(8, 2);
  // Copy W1..b2, then duplicate the single output head.
  const std::size_t out1 = one.dims.output_dim();
  const std::size_t w = static_cast<std::size_t>(one.dims.width);
  const std::size_t shared = one.theta.size() - out1 * w - out1;
  std::copy(one.theta.begin(), one.theta.begin() + static_cast<std::ptrdiff_t>(shared), two.theta.begin());
  const auto w3 = one.theta.begin() + static_cast<std::ptrdiff_t>(shared);
  const auto b3 = w3 + static_cast<std::ptrdiff_t>(out1 * w);
  auto dst = two.theta.begin() + static_cast<std::ptrdiff_t>(shared);
  dst = std::copy(w3, b3, dst);
  dst = std::copy(w3, b3, dst);
  dst = std::copy(b3, one.theta.end(), dst);
  std::copy(b3, one.theta.end(), dst);

  const Scene s = testing::straight_scene({0, 0}, {7, 1}, {0.5, 0});
  EXPECT_EQ(min_ade(predict(one, s), s.target_future()), min_ade(predict(two, s), s.target_future()));
}

std::vector<std::vector<VarPoint>> constant_heads(ad::Tape& tape, const std::vector<std::vector<Vec2>>& heads) {
  std::vector<std::vector<VarPoint>> out;
  for (const auto& h : heads) {
    out.emplace_back();
    for (const auto& p : h) out.back().push_back({tape.variable(p.x), tape.variable(p.y)});
  }
  return out;
}

TEST(LossMinAde, Examples) {
  const Trajectory truth = testing::straight_track({0, 0}, {2, 0}, {0, 0}, 1, 5, 0.5).future;
  std::vector<Vec2> exact, offset, small, large;
  for (const auto& st : truth.states) {
    exact.push_back(st.p);
    offset.push_back(st.p + Vec2{1, 0});
    small.push_back(st.p + Vec2{0, 0.4});
    large.push_back(st.p + Vec2{-0.9, 0});
  }
  ad::Tape tape;
  EXPECT_DOUBLE_EQ(loss_min_ade(constant_heads(tape, {exact}), truth).value, 0.0);
  EXPECT_DOUBLE_EQ(loss_min_ade(constant_heads(tape, {offset}), truth).value, 1.0);
  EXPECT_DOUBLE_EQ(loss_min_ade(constant_heads(tape, {large, small}), truth).value, 0.4);
}

TEST(LossMinAde, GradientFlowsOnlyToWinningHead) {
  const Trajectory truth = testing::straight_track({0, 0}, {2, 0}, {0, 0}, 1, 3, 0.5).future;
  std::vector<Vec2> near, far;
  for (const auto& st : truth.states) {
    near.push_back(st.p + Vec2{0.3, 0.4});
    far.push_back(st.p + Vec2{3, 0});
  }
  ad::Tape tape;
  const auto heads = constant_heads(tape, {far, near});
  const ad::Var loss = loss_min_ade(heads, truth);
  const auto g = tape.gradient(loss, std::vector{heads[0][0].x, heads[1][0].x, heads[1][0].y});
  EXPECT_EQ(g[0], 0.0);
  EXPECT_NEAR(g[1], 0.6 / 3.0, 1e-12);
  EXPECT_NEAR(g[2], 0.8 / 3.0, 1e-12);
}

double loss_at(const ModelParams& params, const Scene& s, const Trajectory& past) {
  return min_ade(predict(params, s, past), s.target_future());
}

TEST_F(TrainedModel, GradientWrtTargetPastMatchesFiniteDifferences) {
  const auto scenes = testing::straight_scenes(99, 10);
  constexpr double h = 1e-5;
  for (const auto& s : scenes) {
    const Trajectory past = s.target_past();
    ad::Tape tape;
    const auto theta = tape.variables(model_->theta);
    const TapePast vars = to_tape(tape, past);
    const ad::Var loss = loss_min_ade(predict_on_tape(tape, model_->dims, theta, s, vars), s.target_future());
    std::vector<ad::Var> wrt;
    for (const auto& p : vars.p) {
      wrt.push_back(p.x);
      wrt.push_back(p.y);
    }
    const auto grad = tape.gradient(loss, wrt);

    std::vector<double> fd(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      Trajectory plus = past, minus = past;
      double& cp = i % 2 == 0 ? plus.states[i / 2].p.x : plus.states[i / 2].p.y;
      double& cm = i % 2 == 0 ? minus.states[i / 2].p.x : minus.states[i / 2].p.y;
      cp += h;
      cm -= h;
      fd[i] = (loss_at(*model_, s, plus) - loss_at(*model_, s, minus)) / (2 * h);
    }
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      diff += (grad[i] - fd[i]) * (grad[i] - fd[i]);
      scale += fd[i] * fd[i];
    }
    EXPECT_LT(std::sqrt(diff), 1e-3 * std::max(1e-6, std::sqrt(scale)));
  }
}

TEST_F(TrainedModel, BeatsHalfOfConstantVelocityBaseline) {
  const auto held_out = testing::straight_scenes(1234, 100);
  double model = 0.0, cv = 0.0;
  for (const auto& s : held_out) {
    model += min_ade(predict(*model_, s), s.target_future());
    cv += cv_ade(s);
  }
  EXPECT_LT(model, 0.5 * cv) << "model " << model / 100 << " m, constant velocity " << cv / 100 << " m";
}

TEST_F(TrainedModel, LossTraceTrendsDown) {
  // Mini-batch noise near convergence wiggles single windows by a few
  // percent, so each 5-epoch mean may exceed the best earlier one by 10%.
  const auto& trace = model_->loss_trace;
  ASSERT_EQ(trace.size(), 120u);
  std::vector<double> windows;
  for (std::size_t w = 0; w + 5 <= trace.size(); w += 5) {
    windows.push_back(std::accumulate(trace.begin() + w, trace.begin() + w + 5, 0.0) / 5.0);
  }
  double best = windows.front();
  for (std::size_t i = 1; i < windows.size(); ++i) {
    EXPECT_LE(windows[i], 1.1 * best) << "window starting at epoch " << 5 * i;
    best = std::min(best, windows[i]);
  }
  EXPECT_LT(windows.back(), 0.25 * windows.front());
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  const auto scenes = testing::straight_scenes(3, 20);
  TrainConfig cfg;
  cfg.dims.width = 8;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  cfg.seed = 9;
  EXPECT_EQ(train(scenes, cfg).theta, init_params(cfg.dims, cfg.seed).theta);
}

TEST(Train, SeededRunsAreBitIdentical) {
  const auto scenes = testing::straight_scenes(4, 40);
  TrainConfig cfg;
  cfg.dims.width = 8;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.seed = 21;
  cfg.smoothing = TrainSmoothing{SmoothingGoal::kControl, 0.5};
  const ModelParams a = train(scenes, cfg);
  const ModelParams b = train(scenes, cfg);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  cfg.seed = 22;
  EXPECT_NE(train(scenes, cfg).theta, a.theta);
}

TEST(Train, RejectsEmptyTrainingSet) {
  EXPECT_THROW(train(std::vector<Scene>{}, TrainConfig{}), std::invalid_argument);
}

TEST(Checkpoint, RoundTrip) {
  ModelParams params = random_model(10);
  params.trained_with = TrainSmoothing{SmoothingGoal::kPosition, 0.25};
  params.loss_trace = {3.0, 2.5, 1.0 / 3.0};
  const auto path = std::filesystem::temp_directory_path() / "smoothtraj_ckpt_roundtrip.json";
  save_checkpoint(params, path);
  EXPECT_EQ(load_checkpoint(path), params);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace smoothtraj
