#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dfm/datagen.hpp"
#include "dfm/error.hpp"
#include "dfm/rng.hpp"
#include "dfm/train.hpp"

namespace dfm {
namespace {

using Vec = std::vector<double>;

// Golden-section minimization of the loss over u = log sigma^2.
double numeric_optimal_variance(double residual_sq, int d) {
  auto f = [&](double u) { return 0.5 * d * u + residual_sq / (2.0 * std::exp(u)); };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -40.0, b = 40.0;
  double c = b - phi * (b - a), e = a + phi * (b - a);
  for (int i = 0; i < 300; ++i) {
    if (f(c) < f(e)) {
      b = e;
    } else {
      a = c;
    }
    c = b - phi * (b - a);
    e = a + phi * (b - a);
  }
  return std::exp(0.5 * (a + b));
}

TEST(Nll, PerfectMeanUnitVarianceGivesZero) {
  Rng rng(1);
  for (int d : {1, 2, 8}) {
    Vec v = rng.normal_vector(static_cast<std::size_t>(d));
    NllResult r = nll_loss({v, 0.0}, v);
    EXPECT_NEAR(r.loss, 0.0, 1e-12);
    for (double g : r.grad_mu) EXPECT_EQ(g, 0.0);
    EXPECT_DOUBLE_EQ(r.grad_log_var, 0.5 * d);
  }
}

TEST(Nll, UnitVarianceReducesToHalfSquaredError) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Vec mu = rng.normal_vector(4), v = rng.normal_vector(4);
    double sq = 0;
    for (int i = 0; i < 4; ++i) sq += (v[i] - mu[i]) * (v[i] - mu[i]);
    EXPECT_NEAR(nll_loss({mu, 0.0}, v).loss, 0.5 * sq, 1e-12);
  }
}

TEST(Nll, HandExample) {
  // d=2, residual^2 = 4, sigma^2 = e: loss = log e + 4 / (2e)
  NllResult r = nll_loss({{1.0, 1.0}, 1.0}, Vec{1.0, 3.0});
  EXPECT_NEAR(r.loss, 1.0 + 2.0 / std::exp(1.0), 1e-15);
  EXPECT_NEAR(r.grad_mu[1], -2.0 / std::exp(1.0), 1e-15);
  EXPECT_NEAR(r.grad_log_var, 1.0 - 2.0 / std::exp(1.0), 1e-15);
}

TEST(Nll, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Vec mu = rng.normal_vector(3), v = rng.normal_vector(3);
    const double lv = rng.uniform(-3, 3), h = 1e-6;
    NllResult r = nll_loss({mu, lv}, v);
    for (int i = 0; i < 3; ++i) {
      Vec up = mu, dn = mu;
      up[i] += h;
      dn[i] -= h;
      EXPECT_NEAR(r.grad_mu[i], (nll_loss({up, lv}, v).loss - nll_loss({dn, lv}, v).loss) / (2 * h), 1e-6);
    }
    EXPECT_NEAR(r.grad_log_var, (nll_loss({mu, lv + h}, v).loss - nll_loss({mu, lv - h}, v).loss) / (2 * h), 1e-6);
  }
}

TEST(Nll, ClampStopsLogVarianceGradient) {
  NllResult hi = nll_loss({{0.0}, 9.0}, Vec{1.0});
  EXPECT_TRUE(hi.clamped);
  EXPECT_EQ(hi.grad_log_var, 0.0);
  EXPECT_DOUBLE_EQ(hi.variance, std::exp(kLogVarMax));
  NllResult lo = nll_loss({{0.0}, -30.0}, Vec{1.0});
  EXPECT_TRUE(lo.clamped);
  EXPECT_DOUBLE_EQ(lo.variance, std::exp(kLogVarMin));
  EXPECT_TRUE(std::isfinite(lo.loss));
  EXPECT_FALSE(nll_loss({{0.0}, 4.9}, Vec{1.0}).clamped);
}

TEST(Nll, RejectsBadInputs) {
  EXPECT_THROW(nll_loss({{0.0, 1.0}, 0.0}, Vec{1.0}), InputDomainError);
  EXPECT_THROW(nll_loss({{0.0}, NAN}, Vec{1.0}), NumericDomainError);
  EXPECT_THROW(nll_loss({{INFINITY}, 0.0}, Vec{1.0}), NumericDomainError);
  EXPECT_THROW(optimal_variance(-1.0, 2), InputDomainError);
  EXPECT_THROW(optimal_variance(1.0, 0), InputDomainError);
}

TEST(Nll, OptimalVarianceMatchesNumericMinimizer) {
  for (int d : {1, 2, 5, 8}) {
    for (double r : {0.01, 0.3, 1.0, 7.5, 42.0}) {
      EXPECT_NEAR(optimal_variance(r, d), numeric_optimal_variance(r, d), 1e-6) << d << " " << r;
      EXPECT_DOUBLE_EQ(optimal_variance(r, d), r / d);
    }
  }
}

TEST(Path, EndpointsAndVelocity) {
  Vec x0{1.0, -2.0}, x1{3.0, 0.5};
  PathSample a = sample_path_point(x0, x1, 0.0);
  PathSample b = sample_path_point(x0, x1, 1.0);
  PathSample m = sample_path_point(x0, x1, 0.25);
  EXPECT_EQ(a.x_t, x0);
  EXPECT_EQ(b.x_t, x1);
  EXPECT_EQ(m.v_target, (Vec{2.0, 2.5}));
  EXPECT_DOUBLE_EQ(m.x_t[0], 1.5);
  EXPECT_THROW(sample_path_point(x0, x1, 1.5), InputDomainError);
  EXPECT_THROW(sample_path_point(x0, Vec{1.0}, 0.5), InputDomainError);
}

TEST(Schedule, CosineDecay) {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.steps = 100;
  EXPECT_DOUBLE_EQ(cosine_lr(c, 0), 1e-3);
  EXPECT_NEAR(cosine_lr(c, 50), 5e-4, 1e-15);
  EXPECT_NEAR(cosine_lr(c, 100), 0.0, 1e-18);
  EXPECT_LT(cosine_lr(c, 60), cosine_lr(c, 40));
}

struct Fixture {
  DatasetSpec spec = DatasetSpec::make(2, 2, 3, 2, 0.1, 0);
  std::vector<NoteSample> data = make_dataset(spec, 16);
  NetShape shape{2, 16, 2, 16, 2, 3, 2};
  TrainConfig cfg;
  Fixture() {
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 16;
    cfg.steps = 10;
    cfg.seed = 5;
  }
};

TEST(TrainStep, ZeroLearningRateLeavesParameters) {
  Fixture f;
  f.cfg.learning_rate = 0.0;
  f.cfg.weight_decay = 0.1;
  NetParams init = NetParams::initialize(f.shape, 1);
  TrainResult r = train(f.data, init, f.cfg);
  EXPECT_EQ(r.params, init);
  EXPECT_EQ(r.log.size(), 10u);
}

TEST(TrainStep, ZeroStepsReturnsInit) {
  Fixture f;
  f.cfg.steps = 0;
  NetParams init = NetParams::initialize(f.shape, 1);
  EXPECT_EQ(train(f.data, init, f.cfg).params, init);
}

TEST(TrainStep, FrozenVarianceHeadGivesHalfMse) {
  Fixture f;
  f.cfg.freeze_logvar_head = true;
  f.cfg.weight_decay = 0.01;
  NetParams init = NetParams::initialize(f.shape, 2);
  init.tensor("logvar_head.b")[0] = 0.0;  // sigma^2 = 1
  OptimizerState st;
  NetParams p = init;
  for (long s = 0; s < 5; ++s) {
    auto batch = draw_batch(f.data, f.cfg, s);
    double half_mse = 0;
    for (const PathSample& ps : batch) {
      VelocityDistribution out = forward(p, ps.x_t, ps.t, ps.cond);
      EXPECT_EQ(out.log_var, 0.0);
      for (std::size_t i = 0; i < 2; ++i) half_mse += 0.5 * std::pow(out.mu[i] - ps.v_target[i], 2);
    }
    StepStats stats = train_step(p, batch, st, f.cfg);
    EXPECT_NEAR(stats.loss, half_mse / batch.size(), 1e-12);
    EXPECT_EQ(stats.logvar_grad_norm, 0.0);
  }
  for (const char* n : {"logvar_head.w", "logvar_head.b"}) {
    auto a = p.tensor(n), b = init.tensor(n);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  EXPECT_NE(p.tensor("mean_head.w")[0], init.tensor("mean_head.w")[0]);
}

TEST(TrainStep, LogVarianceHeadGradientIsClipped) {
  Fixture f;
  f.cfg.logvar_clip = 0.5;
  NetParams p = NetParams::initialize(f.shape, 3);
  p.tensor("logvar_head.b")[0] = -8.0;  // tiny variance -> huge gradient
  OptimizerState st;
  StepStats s = train_step(p, draw_batch(f.data, f.cfg, 0), st, f.cfg);
  EXPECT_GT(s.logvar_grad_norm, 0.5);
  EXPECT_NEAR(s.logvar_grad_norm_clipped, 0.5, 1e-12);

  f.cfg.logvar_clip = 1e9;
  NetParams q = NetParams::initialize(f.shape, 3);
  q.tensor("logvar_head.b")[0] = -8.0;
  OptimizerState st2;
  StepStats s2 = train_step(q, draw_batch(f.data, f.cfg, 0), st2, f.cfg);
  EXPECT_DOUBLE_EQ(s2.logvar_grad_norm, s2.logvar_grad_norm_clipped);
}

TEST(TrainStep, NonFiniteLossLeavesParametersUntouched) {
  Fixture f;
  NetParams p = NetParams::initialize(f.shape, 4);
  p.tensor("mean_head.b")[0] = 1e300;
  NetParams before = p;
  OptimizerState st;
  EXPECT_THROW(train_step(p, draw_batch(f.data, f.cfg, 0), st, f.cfg), NumericDomainError);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, 0);
}

TEST(Train, DeterministicInSeed) {
  Fixture f;
  NetParams init = NetParams::initialize(f.shape, 6);
  TrainResult a = train(f.data, init, f.cfg), b = train(f.data, init, f.cfg);
  EXPECT_EQ(a.params, b.params);
  f.cfg.seed = 6;
  EXPECT_NE(train(f.data, init, f.cfg).params, a.params);
}

TEST(Train, BatchesUseTimeGrid) {
  Fixture f;
  f.cfg.num_timesteps = 10;
  f.cfg.batch_size = 200;
  for (const PathSample& s : draw_batch(f.data, f.cfg, 3)) {
    EXPECT_DOUBLE_EQ(s.t * 10, std::round(s.t * 10));
    EXPECT_LT(s.t, 1.0);
  }
  EXPECT_EQ(draw_batch(f.data, f.cfg, 3)[7].x_t, draw_batch(f.data, f.cfg, 3)[7].x_t);
}

TEST(Train, LossDecreasesOnToyTask) {
  Fixture f;
  f.cfg.steps = 200;
  TrainResult r = train(f.data, NetParams::initialize(f.shape, 7), f.cfg);
  double first = 0, last = 0;
  for (int i = 0; i < 20; ++i) {
    first += r.log[static_cast<std::size_t>(i)].loss;
    last += r.log[r.log.size() - 1 - static_cast<std::size_t>(i)].loss;
  }
  EXPECT_LT(last, first);
}

TEST(Train, VarianceShrinksWhenVelocityIsDeterministic) {
  // A single target point makes v = (x1 - x_t) / (1 - t) a function of
  // (x_t, t), so the fitted variance must fall well below its initial 0.1.
  DatasetSpec spec = DatasetSpec::make(1, 1, 1, 1, 1e-3, 0);
  auto data = make_dataset(spec, 4);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 32;
  cfg.steps = 400;
  TrainResult r = train(data, NetParams::initialize({1, 16, 2, 16, 1, 1, 1}, 1), cfg);
  double late = 0;
  for (std::size_t i = r.log.size() - 20; i < r.log.size(); ++i) late += r.log[i].mean_sigma2 / 20;
  EXPECT_LT(late, 0.05);
}

TEST(Train, ValidationRejectsBadConfigs) {
  Fixture f;
  f.cfg.batch_size = 0;
  EXPECT_THROW(train(f.data, NetParams::initialize(f.shape, 0), f.cfg), InputDomainError);
  Fixture g;
  g.cfg.learning_rate = -1;
  EXPECT_THROW(g.cfg.validate(), InputDomainError);
  EXPECT_THROW(train({}, NetParams::initialize(g.shape, 0), Fixture().cfg), InputDomainError);
}

}  // namespace
}  // namespace dfm
