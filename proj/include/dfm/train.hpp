#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dfm/datagen.hpp"
#include "dfm/net.hpp"

namespace dfm {

/// Point on the straight noise-to-data path together with its target velocity.
struct PathSample {
  std::vector<double> x_t;
  double t = 0.0;
  std::vector<double> v_target;
  ConditionSet cond;
};

/// x_t = (1 - t) x0 + t x1, v = x1 - x0. Only x_t, t and v_target are set.
PathSample sample_path_point(std::span<const double> x0, std::span<const double> x1, double t);

/// Log-variance is clamped to this range before exponentiation.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 5.0;

struct NllResult {
  double loss = 0.0;
  std::vector<double> grad_mu;
  double grad_log_var = 0.0;
  double variance = 0.0;  // exp(clamped log_var)
  bool clamped = false;
};

/// Gaussian negative log-likelihood of v_target under N(mu, sigma^2 I),
/// without the constant term:
///   (d/2) log sigma^2 + |v - mu|^2 / (2 sigma^2)
/// Gradients are exact; the log-variance gradient is zero when the clamp is
/// active.
NllResult nll_loss(const VelocityDistribution& dist, std::span<const double> v_target);

/// Minimizer of the loss over sigma^2 for a fixed residual: residual_sq / d.
double optimal_variance(double residual_sq, int d);

enum class TimeSampling { kDiscreteGrid, kContinuous };

struct TrainConfig {
  // Full-scale defaults; small fixtures override lr and steps.
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  int steps = 20000;
  int batch_size = 128;
  int num_timesteps = 1000;
  double logvar_clip = 1.0;
  TimeSampling time_sampling = TimeSampling::kDiscreteGrid;
  bool freeze_logvar_head = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Decoupled-weight-decay Adam moments.
struct OptimizerState {
  std::vector<double> m, v;
  long step = 0;
};

struct StepStats {
  double loss = 0.0;
  double mean_sigma2 = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;            // whole parameter gradient, after clipping
  double logvar_grad_norm = 0.0;     // log-variance head, before clipping
  double logvar_grad_norm_clipped = 0.0;
  int clamp_events = 0;
};

/// Cosine decay from learning_rate at step 0 to 0 at config.steps.
double cosine_lr(const TrainConfig& config, long step);

/// One optimizer update on the batch-mean loss. The log-variance head's
/// gradient is rescaled to L2 norm <= logvar_clip first. Throws
/// NumericDomainError (parameters untouched) if the loss is not finite.
StepStats train_step(NetParams& params, std::span<const PathSample> batch, OptimizerState& state,
                     const TrainConfig& config);

/// Mean loss and gradient over a batch, before clipping; exposed for tests.
double batch_loss_and_grad(const NetParams& params, std::span<const PathSample> batch, NetParams& grads,
                           StepStats* stats = nullptr);

struct TrainResult {
  NetParams params;
  std::vector<StepStats> log;
};

using StepCallback = std::function<void(long step, const StepStats&)>;

/// Draws batches (uniform dataset index, x0 ~ N(0, I), t on the training
/// grid) and runs config.steps updates from `init`. Deterministic in
/// config.seed.
TrainResult train(const std::vector<NoteSample>& dataset, NetParams init, const TrainConfig& config,
                  const StepCallback& on_step = {});

/// Builds the batch train() would use at `step`.
std::vector<PathSample> draw_batch(const std::vector<NoteSample>& dataset, const TrainConfig& config, long step);

}  // namespace dfm
