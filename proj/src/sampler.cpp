#include "dfm/sampler.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dfm/error.hpp"

namespace dfm {

std::string_view solver_name(Solver s) {
  switch (s) {
    case Solver::kEuler:
      return "euler";
    case Solver::kMidpoint:
      return "midpoint";
    case Solver::kRk4:
      return "rk4";
  }
  return "unknown";
}

Solver parse_solver(std::string_view name) {
  for (Solver s : {Solver::kEuler, Solver::kMidpoint, Solver::kRk4}) {
    if (name == solver_name(s)) return s;
  }
  throw InputDomainError("unknown solver '" + std::string(name) + "'");
}

void SamplerConfig::validate() const {
  if (num_steps < 1) throw InputDomainError("num_steps must be >= 1");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw InputDomainError("tau must be finite and >= 0");
}

double temperature(long long n_candidates, double tau0, double tau_max) {
  if (n_candidates < 0) throw InputDomainError("candidate count must be >= 0");
  const double raw = tau0 * std::sqrt(2.0 * std::log1p(static_cast<double>(n_candidates)));
  return std::min(tau_max, raw);
}

double gaussian_log_density(const VelocityDistribution& dist, std::span<const double> v) {
  const double d = static_cast<double>(dist.mu.size());
  const double var = dist.variance();
  double r = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) r += (v[i] - dist.mu[i]) * (v[i] - dist.mu[i]);
  return -0.5 * d * (std::log(2.0 * std::numbers::pi) + dist.log_var) - r / (2.0 * var);
}

VelocitySample sample_velocity(const VelocityDistribution& dist, double tau, std::span<const double> eps) {
  if (!(tau >= 0.0)) throw InputDomainError("tau must be >= 0");
  if (eps.size() != dist.mu.size()) throw InputDomainError("noise dimension mismatch");
  VelocitySample s;
  s.eps.assign(eps.begin(), eps.end());
  s.v = dist.mu;
  const double scale = tau * dist.stddev();
  if (scale != 0.0) {
    for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] += scale * eps[i];
  }
  s.log_density = gaussian_log_density(dist, s.v);
  return s;
}

VelocitySample sample_velocity(const VelocityDistribution& dist, double tau, Rng& rng) {
  const auto eps = rng.normal_vector(dist.mu.size());
  return sample_velocity(dist, tau, eps);
}

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// x + a * k, elementwise.
std::vector<double> offset(std::span<const double> x, double a, std::span<const double> k) {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * k[i];
  return out;
}

struct StageEval {
  const NetParams& params;
  const ConditionSet& cond;
  double tau;
  std::span<const double> eps;
  int step;
  ForwardCache cache;

  VelocitySample operator()(std::span<const double> x, double t) {
    if (!all_finite(x)) throw TrajectoryDivergence(step, "non-finite solver stage state");
    VelocityDistribution dist = forward(params, x, t, cond, cache);
    if (!all_finite(dist.mu) || !std::isfinite(dist.log_var)) {
      throw TrajectoryDivergence(step, "non-finite velocity prediction");
    }
    return sample_velocity(dist, tau, eps);
  }
};

StepOutcome step_impl(const NetParams& params, std::span<const double> x, int step, const ConditionSet& cond,
                      const SamplerConfig& config, double tau, std::span<const double> eps) {
  const double h = 1.0 / config.num_steps;
  const double t = grid_time(step, config.num_steps);
  StageEval eval{params, cond, tau, eps, step, {}};
  VelocitySample k1 = eval(x, t);
  StepOutcome out;
  switch (config.solver) {
    case Solver::kEuler:
      out.x_next = offset(x, h, k1.v);
      break;
    case Solver::kMidpoint: {
      VelocitySample k2 = eval(offset(x, 0.5 * h, k1.v), t + 0.5 * h);
      out.x_next = offset(x, h, k2.v);
      break;
    }
    case Solver::kRk4: {
      VelocitySample k2 = eval(offset(x, 0.5 * h, k1.v), t + 0.5 * h);
      VelocitySample k3 = eval(offset(x, 0.5 * h, k2.v), t + 0.5 * h);
      VelocitySample k4 = eval(offset(x, h, k3.v), grid_time(step + 1, config.num_steps));
      out.x_next.assign(x.begin(), x.end());
      for (std::size_t i = 0; i < out.x_next.size(); ++i) {
        out.x_next[i] += h * ((k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]) / 6.0);
      }
      break;
    }
  }
  if (!all_finite(out.x_next)) throw TrajectoryDivergence(step, "non-finite state");
  out.sampled_velocity = std::move(k1.v);
  out.log_density = k1.log_density;
  return out;
}

template <typename NoiseFn>
Trajectory integrate_impl(const NetParams& params, std::span<const double> x0, const ConditionSet& cond,
                          const SamplerConfig& config, NoiseFn&& next_noise) {
  config.validate();
  if (x0.size() != static_cast<std::size_t>(params.shape().data_dim)) {
    throw InputDomainError("initial state has the wrong dimension");
  }
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(config.num_steps) + 1);
  traj.states.push_back({0.0, std::vector<double>(x0.begin(), x0.end())});
  for (int k = 0; k < config.num_steps; ++k) {
    std::vector<double> eps = next_noise(k);
    StepOutcome o = step_impl(params, traj.states.back().x, k, cond, config, config.tau, eps);
    traj.cum_log_confidence += o.log_density;
    traj.sampled_velocities.push_back(std::move(o.sampled_velocity));
    traj.noise_draws.push_back(std::move(eps));
    traj.states.push_back({grid_time(k + 1, config.num_steps), std::move(o.x_next)});
  }
  return traj;
}

}  // namespace

StepOutcome integrate_step(const NetParams& params, std::span<const double> x, int step, const ConditionSet& cond,
                           const SamplerConfig& config, std::span<const double> eps) {
  return step_impl(params, x, step, cond, config, config.tau, eps);
}

std::vector<double> mean_completion(const NetParams& params, std::span<const double> x, int step,
                                    const ConditionSet& cond, const SamplerConfig& config) {
  std::vector<double> state(x.begin(), x.end());
  const std::vector<double> zero(state.size(), 0.0);
  for (int k = step; k < config.num_steps; ++k) state = step_impl(params, state, k, cond, config, 0.0, zero).x_next;
  return state;
}

Trajectory integrate(const NetParams& params, std::span<const double> x0, const ConditionSet& cond,
                     const SamplerConfig& config, Rng& rng) {
  const std::size_t d = x0.size();
  return integrate_impl(params, x0, cond, config, [&](int) { return rng.normal_vector(d); });
}

Trajectory replay(const NetParams& params, std::span<const double> x0, const ConditionSet& cond,
                  const SamplerConfig& config, const std::vector<std::vector<double>>& noise_draws) {
  if (noise_draws.size() != static_cast<std::size_t>(config.num_steps)) {
    throw InputDomainError("replay needs one noise draw per step");
  }
  return integrate_impl(params, x0, cond, config, [&](int k) { return noise_draws[static_cast<std::size_t>(k)]; });
}

Trajectory generate_trajectory(const NetParams& params, const ConditionSet& cond, const SamplerConfig& config,
                               Rng& rng) {
  const auto x0 = rng.normal_vector(static_cast<std::size_t>(params.shape().data_dim));
  return integrate(params, x0, cond, config, rng);
}

std::vector<double> generate(const NetParams& params, const ConditionSet& cond, const SamplerConfig& config,
                             Rng& rng) {
  return generate_trajectory(params, cond, config, rng).final_state();
}

}  // namespace dfm
