#include "dfm/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dfm/error.hpp"
#include "dfm/kernels.hpp"
#include "dfm/rng.hpp"

namespace dfm {
namespace {

constexpr double kMaxTimeFrequency = 100.0;

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericDomainError(std::string("non-finite value in ") + what);
  }
}

std::size_t u(int v) { return static_cast<std::size_t>(v); }

}  // namespace

void NetShape::validate() const {
  if (data_dim < 1 || hidden < 1 || depth < 0 || mlp_hidden < 1 || num_classes < 1 || num_pitches < 1 ||
      num_velocities < 1) {
    throw InputDomainError("invalid network shape");
  }
}

double VelocityDistribution::variance() const { return std::exp(log_var); }
double VelocityDistribution::stddev() const { return std::exp(0.5 * log_var); }

Layout::Layout(const NetShape& shape) {
  shape.validate();
  const std::size_t d = u(shape.data_dim), h = u(shape.hidden), m = u(shape.mlp_hidden);
  auto add = [this](std::string name, std::size_t rows, std::size_t cols) {
    tensors.push_back({std::move(name), total, rows, cols});
    std::size_t off = total;
    total += rows * cols;
    return off;
  };
  class_table = add("cond.class", u(shape.num_classes), h);
  pitch_table = add("cond.pitch", u(shape.num_pitches), h);
  velocity_table = add("cond.velocity", u(shape.num_velocities), h);
  in_w = add("input.w", h, d);
  in_b = add("input.b", h, 1);
  for (int l = 0; l < shape.depth; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    BlockLayout b{};
    b.gamma_w = add(p + "gamma.w", h, h);
    b.gamma_b = add(p + "gamma.b", h, 1);
    b.beta_w = add(p + "beta.w", h, h);
    b.beta_b = add(p + "beta.b", h, 1);
    b.alpha_w = add(p + "alpha.w", h, h);
    b.alpha_b = add(p + "alpha.b", h, 1);
    b.fc1_w = add(p + "fc1.w", m, h);
    b.fc1_b = add(p + "fc1.b", m, 1);
    b.fc2_w = add(p + "fc2.w", h, m);
    b.fc2_b = add(p + "fc2.b", h, 1);
    blocks.push_back(b);
  }
  mean_w = add("mean_head.w", d, h);
  mean_b = add("mean_head.b", d, 1);
  logvar_w = add("logvar_head.w", 1, h);
  logvar_b = add("logvar_head.b", 1, 1);
}

const TensorInfo& Layout::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw InputDomainError("unknown tensor: " + name);
}

NetParams::NetParams(const NetShape& shape, std::uint64_t init_seed)
    : shape_(shape),
      layout_(std::make_shared<const Layout>(shape)),
      init_seed_(init_seed),
      values_(layout_->total, 0.0) {}

NetParams NetParams::zeros_like(const NetParams& other) {
  NetParams z = other;
  std::fill(z.values_.begin(), z.values_.end(), 0.0);
  return z;
}

NetParams NetParams::initialize(const NetShape& shape, std::uint64_t seed) {
  NetParams p(shape, seed);
  Rng rng(seed);
  const Layout& lay = p.layout();
  for (const TensorInfo& t : lay.tensors) {
    auto span = p.at(t.offset, t.size());
    if (t.name.rfind("logvar_head", 0) == 0) continue;
    double bound;
    if (t.name.rfind("cond.", 0) == 0) {
      bound = 1.0;
    } else {
      // Biases share the fan-in of their weight matrix.
      const std::string weight = t.name.substr(0, t.name.size() - 1) + "w";
      const std::size_t fan_in = t.cols == 1 && t.name.back() == 'b' ? lay.find(weight).cols : t.cols;
      bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    }
    for (double& v : span) v = rng.uniform(-bound, bound);
  }
  p.at(lay.logvar_b, 1)[0] = kInitialLogVarianceValue;
  return p;
}

std::span<double> NetParams::tensor(const std::string& name) {
  const TensorInfo& t = layout_->find(name);
  return at(t.offset, t.size());
}

std::span<const double> NetParams::tensor(const std::string& name) const {
  const TensorInfo& t = layout_->find(name);
  return at(t.offset, t.size());
}

void check_condition(const ConditionSet& cond, const NetShape& shape) {
  if (cond.class_id < 0 || cond.class_id >= shape.num_classes || cond.pitch_id < 0 ||
      cond.pitch_id >= shape.num_pitches || cond.velocity_id < 0 || cond.velocity_id >= shape.num_velocities) {
    throw InputDomainError("condition (" + std::to_string(cond.class_id) + "," + std::to_string(cond.pitch_id) +
                           "," + std::to_string(cond.velocity_id) + ") out of table bounds");
  }
}

std::vector<double> time_embedding(double t, int width) {
  std::vector<double> e(u(width), 0.0);
  const int half = width / 2;
  for (int k = 0; k < half; ++k) {
    const double freq =
        half > 1 ? std::exp(std::log(kMaxTimeFrequency) * static_cast<double>(k) / (half - 1)) : 1.0;
    e[u(k)] = std::sin(freq * t);
    e[u(k + half)] = std::cos(freq * t);
  }
  return e;
}

std::vector<double> embed_condition(const ConditionSet& cond, const NetParams& params) {
  check_condition(cond, params.shape());
  const std::size_t h = u(params.shape().hidden);
  const Layout& lay = params.layout();
  std::vector<double> out(h, 0.0);
  kernels::axpy(1.0, params.at(lay.class_table + u(cond.class_id) * h, h), out);
  kernels::axpy(1.0, params.at(lay.pitch_table + u(cond.pitch_id) * h, h), out);
  kernels::axpy(1.0, params.at(lay.velocity_table + u(cond.velocity_id) * h, h), out);
  return out;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_derivative(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

void ForwardCache::resize(const NetShape& shape) {
  const std::size_t h = u(shape.hidden), m = u(shape.mlp_hidden);
  input.resize(u(shape.data_dim));
  cond_vec.resize(h);
  stream.resize(u(shape.depth) + 1);
  for (auto& s : stream) s.resize(h);
  blocks.resize(u(shape.depth));
  for (auto& b : blocks) {
    b.xhat.resize(h);
    b.gamma.resize(h);
    b.beta.resize(h);
    b.alpha.resize(h);
    b.modulated.resize(h);
    b.pre_act.resize(m);
    b.act.resize(m);
    b.out.resize(h);
  }
}

namespace {

// h_out = h_in + alpha * MLP(LN(h_in) * (1 + gamma) + beta), recording
// intermediates into `blk`.
void block_forward(const NetParams& params, const BlockLayout& bl, std::span<const double> h_in,
                   std::span<const double> c, ForwardCache::Block& blk, std::span<double> h_out) {
  const auto& k = kernels::active();
  const std::size_t h = u(params.shape().hidden), m = u(params.shape().mlp_hidden);
  const double* w = params.values().data();

  double mean = 0.0;
  for (double v : h_in) mean += v;
  mean /= static_cast<double>(h);
  double var = 0.0;
  for (double v : h_in) var += (v - mean) * (v - mean);
  var /= static_cast<double>(h);
  blk.rstd = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < h; ++i) blk.xhat[i] = (h_in[i] - mean) * blk.rstd;

  k.gemv(w + bl.gamma_w, c.data(), w + bl.gamma_b, blk.gamma.data(), h, h);
  k.gemv(w + bl.beta_w, c.data(), w + bl.beta_b, blk.beta.data(), h, h);
  k.gemv(w + bl.alpha_w, c.data(), w + bl.alpha_b, blk.alpha.data(), h, h);
  for (std::size_t i = 0; i < h; ++i) blk.modulated[i] = blk.xhat[i] * (1.0 + blk.gamma[i]) + blk.beta[i];

  k.gemv(w + bl.fc1_w, blk.modulated.data(), w + bl.fc1_b, blk.pre_act.data(), m, h);
  for (std::size_t i = 0; i < m; ++i) blk.act[i] = silu(blk.pre_act[i]);
  k.gemv(w + bl.fc2_w, blk.act.data(), w + bl.fc2_b, blk.out.data(), h, m);

  for (std::size_t i = 0; i < h; ++i) h_out[i] = h_in[i] + blk.alpha[i] * blk.out[i];
}

void check_inputs(const NetParams& params, std::span<const double> x_t, double t, const ConditionSet& cond) {
  if (x_t.size() != u(params.shape().data_dim)) {
    throw InputDomainError("state has length " + std::to_string(x_t.size()) + ", network expects " +
                           std::to_string(params.shape().data_dim));
  }
  require_finite(x_t, "network input state");
  if (!std::isfinite(t)) throw NumericDomainError("non-finite time");
  if (t < 0.0 || t > 1.0) throw InputDomainError("time outside [0, 1]");
  check_condition(cond, params.shape());
}

}  // namespace

std::vector<double> adaln_block(const NetParams& params, int block, std::span<const double> x,
                                std::span<const double> cond_vec) {
  const NetShape& s = params.shape();
  if (block < 0 || block >= s.depth) throw InputDomainError("block index out of range");
  if (x.size() != u(s.hidden) || cond_vec.size() != u(s.hidden)) {
    throw InputDomainError("adaln_block expects vectors of the hidden width");
  }
  ForwardCache cache;
  cache.resize(s);
  std::vector<double> out(u(s.hidden));
  block_forward(params, params.layout().blocks[u(block)], x, cond_vec, cache.blocks[u(block)], out);
  return out;
}

VelocityDistribution forward(const NetParams& params, std::span<const double> x_t, double t,
                             const ConditionSet& cond) {
  ForwardCache cache;
  return forward(params, x_t, t, cond, cache);
}

VelocityDistribution forward(const NetParams& params, std::span<const double> x_t, double t,
                             const ConditionSet& cond, ForwardCache& cache) {
  check_inputs(params, x_t, t, cond);
  const NetShape& s = params.shape();
  const Layout& lay = params.layout();
  const auto& k = kernels::active();
  const std::size_t d = u(s.data_dim), h = u(s.hidden);
  const double* w = params.values().data();

  cache.resize(s);
  cache.cond = cond;
  std::copy(x_t.begin(), x_t.end(), cache.input.begin());

  cache.cond_vec = time_embedding(t, s.hidden);
  k.axpy(1.0, w + lay.class_table + u(cond.class_id) * h, cache.cond_vec.data(), h);
  k.axpy(1.0, w + lay.pitch_table + u(cond.pitch_id) * h, cache.cond_vec.data(), h);
  k.axpy(1.0, w + lay.velocity_table + u(cond.velocity_id) * h, cache.cond_vec.data(), h);

  k.gemv(w + lay.in_w, cache.input.data(), w + lay.in_b, cache.stream[0].data(), h, d);
  for (std::size_t l = 0; l < lay.blocks.size(); ++l) {
    block_forward(params, lay.blocks[l], cache.stream[l], cache.cond_vec, cache.blocks[l], cache.stream[l + 1]);
  }

  const std::vector<double>& top = cache.stream.back();
  VelocityDistribution out;
  out.mu.resize(d);
  k.gemv(w + lay.mean_w, top.data(), w + lay.mean_b, out.mu.data(), d, h);
  out.log_var = k.dot(w + lay.logvar_w, top.data(), h) + w[lay.logvar_b];
  return out;
}

void backward(const NetParams& params, const ForwardCache& cache, std::span<const double> grad_mu,
              double grad_log_var, NetParams& grads) {
  const NetShape& s = params.shape();
  const Layout& lay = params.layout();
  const auto& k = kernels::active();
  const std::size_t d = u(s.data_dim), h = u(s.hidden), m = u(s.mlp_hidden);
  if (grad_mu.size() != d) throw InputDomainError("upstream mean gradient has wrong length");
  if (grads.size() != params.size()) throw InputDomainError("gradient buffer shape mismatch");
  const double* w = params.values().data();
  double* g = grads.values().data();

  // Heads.
  const std::vector<double>& top = cache.stream.back();
  std::vector<double> dh(h, 0.0);
  k.outer_acc(grad_mu.data(), top.data(), g + lay.mean_w, d, h);
  for (std::size_t i = 0; i < d; ++i) g[lay.mean_b + i] += grad_mu[i];
  k.gemv_t_acc(w + lay.mean_w, grad_mu.data(), dh.data(), d, h);
  k.axpy(grad_log_var, top.data(), g + lay.logvar_w, h);
  g[lay.logvar_b] += grad_log_var;
  k.axpy(grad_log_var, w + lay.logvar_w, dh.data(), h);

  std::vector<double> dcond(h, 0.0), dalpha(h), dout(h), dact(m), dpre(m), dmod(h), dgamma(h), dxhat(h);
  for (std::size_t li = lay.blocks.size(); li-- > 0;) {
    const BlockLayout& bl = lay.blocks[li];
    const ForwardCache::Block& blk = cache.blocks[li];

    for (std::size_t i = 0; i < h; ++i) {
      dalpha[i] = dh[i] * blk.out[i];
      dout[i] = dh[i] * blk.alpha[i];
    }
    // fc2
    k.outer_acc(dout.data(), blk.act.data(), g + bl.fc2_w, h, m);
    k.axpy(1.0, dout.data(), g + bl.fc2_b, h);
    std::fill(dact.begin(), dact.end(), 0.0);
    k.gemv_t_acc(w + bl.fc2_w, dout.data(), dact.data(), h, m);
    for (std::size_t i = 0; i < m; ++i) dpre[i] = dact[i] * silu_derivative(blk.pre_act[i]);
    // fc1
    k.outer_acc(dpre.data(), blk.modulated.data(), g + bl.fc1_w, m, h);
    k.axpy(1.0, dpre.data(), g + bl.fc1_b, m);
    std::fill(dmod.begin(), dmod.end(), 0.0);
    k.gemv_t_acc(w + bl.fc1_w, dpre.data(), dmod.data(), m, h);

    // Modulation: dbeta = dmod.
    for (std::size_t i = 0; i < h; ++i) {
      dgamma[i] = dmod[i] * blk.xhat[i];
      dxhat[i] = dmod[i] * (1.0 + blk.gamma[i]);
    }
    k.outer_acc(dgamma.data(), cache.cond_vec.data(), g + bl.gamma_w, h, h);
    k.axpy(1.0, dgamma.data(), g + bl.gamma_b, h);
    k.outer_acc(dmod.data(), cache.cond_vec.data(), g + bl.beta_w, h, h);
    k.axpy(1.0, dmod.data(), g + bl.beta_b, h);
    k.outer_acc(dalpha.data(), cache.cond_vec.data(), g + bl.alpha_w, h, h);
    k.axpy(1.0, dalpha.data(), g + bl.alpha_b, h);
    k.gemv_t_acc(w + bl.gamma_w, dgamma.data(), dcond.data(), h, h);
    k.gemv_t_acc(w + bl.beta_w, dmod.data(), dcond.data(), h, h);
    k.gemv_t_acc(w + bl.alpha_w, dalpha.data(), dcond.data(), h, h);

    // Layer norm; the residual path keeps dh.
    double mean_dx = 0.0, mean_dx_xhat = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
      mean_dx += dxhat[i];
      mean_dx_xhat += dxhat[i] * blk.xhat[i];
    }
    mean_dx /= static_cast<double>(h);
    mean_dx_xhat /= static_cast<double>(h);
    for (std::size_t i = 0; i < h; ++i) {
      dh[i] += blk.rstd * (dxhat[i] - mean_dx - blk.xhat[i] * mean_dx_xhat);
    }
  }

  k.outer_acc(dh.data(), cache.input.data(), g + lay.in_w, h, d);
  k.axpy(1.0, dh.data(), g + lay.in_b, h);

  const ConditionSet& c = cache.cond;
  k.axpy(1.0, dcond.data(), g + lay.class_table + u(c.class_id) * h, h);
  k.axpy(1.0, dcond.data(), g + lay.pitch_table + u(c.pitch_id) * h, h);
  k.axpy(1.0, dcond.data(), g + lay.velocity_table + u(c.velocity_id) * h, h);
}

NetParams backward(const NetParams& params, std::span<const double> x_t, double t, const ConditionSet& cond,
                   std::span<const double> grad_mu, double grad_log_var) {
  ForwardCache cache;
  forward(params, x_t, t, cond, cache);
  NetParams grads = NetParams::zeros_like(params);
  backward(params, cache, grad_mu, grad_log_var, grads);
  return grads;
}

}  // namespace dfm
