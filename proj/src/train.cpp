#include "dfm/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dfm/error.hpp"
#include "dfm/kernels.hpp"

namespace dfm {

PathSample sample_path_point(std::span<const double> x0, std::span<const double> x1, double t) {
  if (x0.size() != x1.size()) throw InputDomainError("path endpoints differ in dimension");
  if (!(t >= 0.0 && t <= 1.0)) throw InputDomainError("path time outside [0, 1]");
  PathSample s;
  s.t = t;
  s.x_t.resize(x0.size());
  s.v_target.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    s.x_t[i] = (1.0 - t) * x0[i] + t * x1[i];
    s.v_target[i] = x1[i] - x0[i];
  }
  return s;
}

NllResult nll_loss(const VelocityDistribution& dist, std::span<const double> v_target) {
  const std::size_t d = dist.mu.size();
  if (d == 0 || v_target.size() != d) throw InputDomainError("nll_loss dimension mismatch");
  if (!std::isfinite(dist.log_var)) throw NumericDomainError("non-finite log-variance");
  NllResult r;
  r.grad_mu.resize(d);
  const double lv = std::clamp(dist.log_var, kLogVarMin, kLogVarMax);
  r.clamped = lv != dist.log_var;
  r.variance = std::exp(lv);
  double residual_sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = dist.mu[i] - v_target[i];
    if (!std::isfinite(diff)) throw NumericDomainError("non-finite mean or target velocity");
    residual_sq += diff * diff;
    r.grad_mu[i] = diff / r.variance;
  }
  const double half_d = 0.5 * static_cast<double>(d);
  r.loss = half_d * lv + residual_sq / (2.0 * r.variance);
  r.grad_log_var = r.clamped ? 0.0 : half_d - residual_sq / (2.0 * r.variance);
  return r;
}

double optimal_variance(double residual_sq, int d) {
  if (d < 1) throw InputDomainError("dimension must be >= 1");
  if (!(residual_sq >= 0.0)) throw InputDomainError("residual must be non-negative");
  return residual_sq / d;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw InputDomainError("learning rate must be non-negative");
  if (num_timesteps < 2) throw InputDomainError("num_timesteps must be >= 2");
  if (!(logvar_clip > 0.0)) throw InputDomainError("logvar_clip must be positive");
  if (batch_size < 1) throw InputDomainError("batch_size must be >= 1");
  if (steps < 0) throw InputDomainError("steps must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw InputDomainError("invalid Adam betas");
}

double cosine_lr(const TrainConfig& config, long step) {
  if (config.steps <= 0) return config.learning_rate;
  const double frac = std::min(1.0, static_cast<double>(step) / config.steps);
  return config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

double batch_loss_and_grad(const NetParams& params, std::span<const PathSample> batch, NetParams& grads,
                           StepStats* stats) {
  if (batch.empty()) throw InputDomainError("empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  ForwardCache cache;
  double loss = 0.0, sigma2 = 0.0;
  int clamps = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PathSample& s = batch[i];
    VelocityDistribution dist = forward(params, s.x_t, s.t, s.cond, cache);
    NllResult r = nll_loss(dist, s.v_target);
    if (!std::isfinite(r.loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at batch item " << i << " (t=" << s.t << ", log_var=" << dist.log_var << ")";
      throw NumericDomainError(msg.str());
    }
    loss += r.loss;
    sigma2 += r.variance;
    clamps += r.clamped ? 1 : 0;
    for (double& g : r.grad_mu) g *= scale;
    backward(params, cache, r.grad_mu, r.grad_log_var * scale, grads);
  }
  if (stats) {
    stats->loss = loss * scale;
    stats->mean_sigma2 = sigma2 * scale;
    stats->clamp_events = clamps;
  }
  return loss * scale;
}

StepStats train_step(NetParams& params, std::span<const PathSample> batch, OptimizerState& state,
                     const TrainConfig& config) {
  NetParams grads = NetParams::zeros_like(params);
  StepStats stats;
  batch_loss_and_grad(params, batch, grads, &stats);

  const Layout& lay = params.layout();
  auto head_w = grads.at(lay.logvar_w, static_cast<std::size_t>(params.shape().hidden));
  double& head_b = grads.values()[lay.logvar_b];
  if (config.freeze_logvar_head) {
    std::fill(head_w.begin(), head_w.end(), 0.0);
    head_b = 0.0;
  }
  const double head_norm = std::sqrt(kernels::dot(head_w, head_w) + head_b * head_b);
  stats.logvar_grad_norm = head_norm;
  if (head_norm > config.logvar_clip) {
    const double s = config.logvar_clip / head_norm;
    for (double& g : head_w) g *= s;
    head_b *= s;
  }
  stats.logvar_grad_norm_clipped = std::sqrt(kernels::dot(head_w, head_w) + head_b * head_b);
  stats.grad_norm = std::sqrt(kernels::dot(grads.values(), grads.values()));

  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  const double lr = cosine_lr(config, state.step);
  stats.lr = lr;
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  auto p = params.values();
  auto g = grads.values();
  const std::size_t head_begin = lay.logvar_w;
  const std::size_t head_end = lay.logvar_b + 1;
  std::vector<double> frozen_head;
  if (config.freeze_logvar_head) frozen_head.assign(p.begin() + head_begin, p.begin() + head_end);
  for (std::size_t i = 0; i < p.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g[i] * g[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + config.adam_eps) + config.weight_decay * p[i]);
  }
  if (config.freeze_logvar_head) {
    // Decoupled decay would still move a frozen head.
    std::copy(frozen_head.begin(), frozen_head.end(), p.begin() + head_begin);
  }
  return stats;
}

std::vector<PathSample> draw_batch(const std::vector<NoteSample>& dataset, const TrainConfig& config, long step) {
  if (dataset.empty()) throw InputDomainError("empty dataset");
  Rng rng = Rng(config.seed).child(0xba7c).child(static_cast<std::uint64_t>(step));
  std::vector<PathSample> batch;
  batch.reserve(static_cast<std::size_t>(config.batch_size));
  const std::size_t d = dataset.front().x.size();
  std::vector<double> x0(d);
  for (int b = 0; b < config.batch_size; ++b) {
    const NoteSample& ns = dataset[rng.index(dataset.size())];
    rng.fill_normal(x0);
    double t;
    if (config.time_sampling == TimeSampling::kDiscreteGrid) {
      t = static_cast<double>(rng.index(static_cast<std::size_t>(config.num_timesteps))) / config.num_timesteps;
    } else {
      t = rng.uniform(0.0, 1.0);
    }
    PathSample s = sample_path_point(x0, ns.x, t);
    s.cond = ns.cond;
    batch.push_back(std::move(s));
  }
  return batch;
}

TrainResult train(const std::vector<NoteSample>& dataset, NetParams init, const TrainConfig& config,
                  const StepCallback& on_step) {
  config.validate();
  if (dataset.empty()) throw InputDomainError("empty dataset");
  TrainResult result{std::move(init), {}};
  result.log.reserve(static_cast<std::size_t>(config.steps));
  OptimizerState state;
  for (long step = 0; step < config.steps; ++step) {
    const auto batch = draw_batch(dataset, config, step);
    StepStats stats = train_step(result.params, batch, state, config);
    if (on_step) on_step(step, stats);
    result.log.push_back(stats);
  }
  return result;
}

}  // namespace dfm
