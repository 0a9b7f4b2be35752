#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dfm/net.hpp"
#include "dfm/rng.hpp"

namespace dfm {

enum class Solver { kEuler, kMidpoint, kRk4 };

std::string_view solver_name(Solver s);
Solver parse_solver(std::string_view name);

struct SamplerConfig {
  int num_steps = 16;
  Solver solver = Solver::kRk4;
  double tau = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrajectoryPoint {
  double t = 0.0;
  std::vector<double> x;
  bool operator==(const TrajectoryPoint&) const = default;
};

/// Integration record from t=0 to t=1. For step k, sampled_velocities[k]
/// is the first-stage sampled velocity at (t_k, x_k), noise_draws[k] the
/// step's epsilon, and cum_log_confidence accumulates the log-density of
/// each sampled_velocities[k] under that stage's predicted Gaussian.
struct Trajectory {
  std::vector<TrajectoryPoint> states;
  std::vector<std::vector<double>> sampled_velocities;
  std::vector<std::vector<double>> noise_draws;
  double cum_log_confidence = 0.0;

  const std::vector<double>& final_state() const { return states.back().x; }
  bool operator==(const Trajectory&) const = default;
};

inline constexpr double kTau0 = 0.01;
inline constexpr double kTauMax = 0.08;

/// min(tau_max, tau0 * sqrt(2 ln(N + 1)))
double temperature(long long n_candidates, double tau0 = kTau0, double tau_max = kTauMax);

/// Isotropic Gaussian log-density of v under N(mu, sigma^2 I).
double gaussian_log_density(const VelocityDistribution& dist, std::span<const double> v);

struct VelocitySample {
  std::vector<double> v;
  std::vector<double> eps;
  double log_density = 0.0;
};

/// v = mu + tau * sigma * eps, eps ~ N(0, I).
VelocitySample sample_velocity(const VelocityDistribution& dist, double tau, Rng& rng);
/// Same with a given eps.
VelocitySample sample_velocity(const VelocityDistribution& dist, double tau, std::span<const double> eps);

/// Integrates dx/dt = mu + tau sigma eps on a uniform grid. One eps is drawn
/// from `rng` per step and shared by all solver stages of that step.
/// Throws TrajectoryDivergence naming the step if the state stops being finite.
Trajectory integrate(const NetParams& params, std::span<const double> x0, const ConditionSet& cond,
                     const SamplerConfig& config, Rng& rng);

/// Re-runs integrate() with recorded per-step noise instead of fresh draws.
Trajectory replay(const NetParams& params, std::span<const double> x0, const ConditionSet& cond,
                  const SamplerConfig& config, const std::vector<std::vector<double>>& noise_draws);

/// Draws x0 ~ N(0, I) from `rng`, then integrates with the same stream.
Trajectory generate_trajectory(const NetParams& params, const ConditionSet& cond, const SamplerConfig& config,
                               Rng& rng);
std::vector<double> generate(const NetParams& params, const ConditionSet& cond, const SamplerConfig& config,
                             Rng& rng);

/// Result of advancing one grid step.
struct StepOutcome {
  std::vector<double> x_next;
  std::vector<double> sampled_velocity;
  double log_density = 0.0;
};

/// Advances x from grid step `step` to `step + 1` with the configured solver.
StepOutcome integrate_step(const NetParams& params, std::span<const double> x, int step, const ConditionSet& cond,
                           const SamplerConfig& config, std::span<const double> eps);

/// Deterministic (tau = 0) completion from grid step `step` to t = 1.
std::vector<double> mean_completion(const NetParams& params, std::span<const double> x, int step,
                                    const ConditionSet& cond, const SamplerConfig& config);

inline double grid_time(int step, int num_steps) { return static_cast<double>(step) / num_steps; }

}  // namespace dfm
