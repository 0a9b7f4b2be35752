#include "dfm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dfm/error.hpp"
#include "dfm/net.hpp"
#include "dfm/rng.hpp"
#include "dfm/train.hpp"

namespace dfm {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(const GradCheckOptions& options, std::uint64_t seed) {
  if (options.batch < 1) throw InputDomainError("gradient check batch must be positive");
  const NetShape shape{options.data_dim, options.hidden, options.depth, options.mlp_hidden, 3, 4, 2};
  Rng rng(seed);
  NetParams params = NetParams::initialize(shape, rng.child(0).seed());

  // A zero log-variance head would hide the path from log_var back into
  // the trunk.
  Rng head = rng.child(1);
  const double bound = 0.5 / std::sqrt(static_cast<double>(options.hidden));
  for (double& w : params.tensor("logvar_head.w")) w = head.uniform(-bound, bound);

  Rng data = rng.child(2);
  std::vector<PathSample> batch;
  for (int i = 0; i < options.batch; ++i) {
    auto x0 = data.normal_vector(static_cast<std::size_t>(options.data_dim));
    auto x1 = data.normal_vector(static_cast<std::size_t>(options.data_dim));
    PathSample s = sample_path_point(x0, x1, data.uniform(0.0, 1.0));
    s.cond = {static_cast<int>(data.index(3)), static_cast<int>(data.index(4)), static_cast<int>(data.index(2))};
    batch.push_back(std::move(s));
  }

  NetParams analytic = NetParams::zeros_like(params);
  batch_loss_and_grad(params, batch, analytic);
  if (!options.corrupt_tensor.empty()) {
    for (double& g : analytic.tensor(options.corrupt_tensor)) g = g * 1.01 + 1e-3;
  }

  NetParams scratch = NetParams::zeros_like(params);
  NetParams numeric = finite_diff_grad(
      params,
      [&](const NetParams& p) {
        std::fill(scratch.values().begin(), scratch.values().end(), 0.0);
        return batch_loss_and_grad(p, batch, scratch);
      },
      options.step);

  GradCheckReport report;
  report.seed = seed;
  report.data_dim = options.data_dim;
  for (const TensorInfo& t : params.layout().tensors) {
    TensorGradError e{t.name, t.size(), 0.0, 0.0};
    auto a = analytic.at(t.offset, t.size());
    auto n = numeric.at(t.offset, t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      e.max_rel_error = std::max(e.max_rel_error, relative_error(a[i], n[i], options.floor));
      e.max_abs_error = std::max(e.max_abs_error, std::fabs(a[i] - n[i]));
    }
    report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
    report.tensors.push_back(std::move(e));
  }
  return report;
}

}  // namespace dfm
