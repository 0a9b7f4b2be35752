#pragma once

// Velocity network: condition lookup tables + sinusoidal time embedding
// feeding a stack of AdaLN-modulated residual MLP blocks, with separate
// linear heads for the velocity mean and the scalar log-variance.
//
//   c    = class[k] + pitch[p] + velocity[v] + time_embedding(t)
//   h_0  = W_in x + b_in
//   h_l+1 = h_l + alpha(c) * MLP(LN(h_l) * (1 + gamma(c)) + beta(c))
//   mu   = W_mu h_L + b_mu,   log_var = w_lv . h_L + b_lv
//
// All parameters live in one flat buffer; a shared Layout maps tensor names
// to offsets so optimizers and finite differences can treat the parameter
// set as a single vector.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dfm/types.hpp"

namespace dfm {

struct NetShape {
  int data_dim = 2;     // d
  int hidden = 128;     // H
  int depth = 4;        // L
  int mlp_hidden = 128; // inner width of each block's MLP
  int num_classes = 4;
  int num_pitches = 12;
  int num_velocities = 3;

  void validate() const;
  bool operator==(const NetShape&) const = default;
};

struct VelocityDistribution {
  std::vector<double> mu;
  double log_var = 0.0;

  double variance() const;
  double stddev() const;
};

/// Offsets of one block's tensors inside the flat parameter buffer.
struct BlockLayout {
  std::size_t gamma_w, gamma_b, beta_w, beta_b, alpha_w, alpha_b;
  std::size_t fc1_w, fc1_b, fc2_w, fc2_b;
};

struct TensorInfo {
  std::string name;
  std::size_t offset;
  std::size_t rows;
  std::size_t cols;
  std::size_t size() const { return rows * cols; }
};

struct Layout {
  explicit Layout(const NetShape& shape);

  std::size_t class_table, pitch_table, velocity_table;
  std::size_t in_w, in_b;
  std::vector<BlockLayout> blocks;
  std::size_t mean_w, mean_b, logvar_w, logvar_b;
  std::size_t total = 0;
  std::vector<TensorInfo> tensors;

  const TensorInfo& find(const std::string& name) const;
};

class NetParams {
 public:
  /// Zero-filled parameters of the given shape.
  explicit NetParams(const NetShape& shape, std::uint64_t init_seed = 0);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, lookup
  /// tables uniform in [-1, 1], log-variance head zero weights with bias
  /// log(0.1).
  static NetParams initialize(const NetShape& shape, std::uint64_t seed);
  static NetParams zeros_like(const NetParams& other);

  const NetShape& shape() const { return shape_; }
  const Layout& layout() const { return *layout_; }
  std::uint64_t init_seed() const { return init_seed_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> tensor(const std::string& name);
  std::span<const double> tensor(const std::string& name) const;
  std::span<double> at(std::size_t offset, std::size_t count) { return {values_.data() + offset, count}; }
  std::span<const double> at(std::size_t offset, std::size_t count) const {
    return {values_.data() + offset, count};
  }

  bool operator==(const NetParams& o) const {
    return shape_ == o.shape_ && init_seed_ == o.init_seed_ && values_ == o.values_;
  }

 private:
  NetShape shape_;
  std::shared_ptr<const Layout> layout_;
  std::uint64_t init_seed_;
  std::vector<double> values_;
};

/// Initial log-variance head output.
inline constexpr double kInitialLogVarianceValue = -2.302585092994045684;  // log(0.1)
inline constexpr double kLayerNormEps = 1e-5;

/// Fixed sinusoidal embedding of t in [0, 1]; frequencies geometric in
/// [1, 100] rad per unit time, sin in the first half, cos in the second.
std::vector<double> time_embedding(double t, int width);

/// Sum of the three lookup-table rows for `cond`.
std::vector<double> embed_condition(const ConditionSet& cond, const NetParams& params);

/// One AdaLN residual block applied to `x` under conditioning vector `cond_vec`.
std::vector<double> adaln_block(const NetParams& params, int block, std::span<const double> x,
                                std::span<const double> cond_vec);

/// Smooth activation used inside every block (x * sigmoid(x)).
double silu(double x);
double silu_derivative(double x);

/// Activations kept by a forward pass for the backward pass. Reusable
/// across calls with the same shape to avoid reallocation.
struct ForwardCache {
  struct Block {
    std::vector<double> xhat, gamma, beta, alpha, modulated, pre_act, act, out;
    double rstd = 0.0;
  };
  std::vector<double> input, cond_vec;
  std::vector<std::vector<double>> stream;  // h_0 .. h_L
  std::vector<Block> blocks;
  ConditionSet cond;

  void resize(const NetShape& shape);
};

VelocityDistribution forward(const NetParams& params, std::span<const double> x_t, double t,
                             const ConditionSet& cond);
/// Forward pass that records activations into `cache`. The returned
/// distribution is identical to forward().
VelocityDistribution forward(const NetParams& params, std::span<const double> x_t, double t,
                             const ConditionSet& cond, ForwardCache& cache);

/// Accumulates (+=) parameter gradients of  <grad_mu, mu> + grad_log_var * log_var
/// into `grads`, using activations from a prior forward() into `cache`.
void backward(const NetParams& params, const ForwardCache& cache, std::span<const double> grad_mu,
              double grad_log_var, NetParams& grads);

/// Convenience: recompute the forward pass and return fresh gradients.
NetParams backward(const NetParams& params, std::span<const double> x_t, double t, const ConditionSet& cond,
                   std::span<const double> grad_mu, double grad_log_var);

/// Central-difference gradient of a scalar function of the parameters.
/// step must be > 0.
template <typename LossFn>
NetParams finite_diff_grad(const NetParams& params, LossFn&& loss_fn, double step);

/// Validates ids against the shape's table sizes.
void check_condition(const ConditionSet& cond, const NetShape& shape);

}  // namespace dfm

#include "dfm/detail/finite_diff.hpp"
