#pragma once

#include "dfm/error.hpp"

namespace dfm {

template <typename LossFn>
NetParams finite_diff_grad(const NetParams& params, LossFn&& loss_fn, double step) {
  if (!(step > 0.0)) throw InputDomainError("finite difference step must be positive");
  NetParams probe = params;
  NetParams grad = NetParams::zeros_like(params);
  auto p = probe.values();
  auto g = grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + step;
    const double up = loss_fn(static_cast<const NetParams&>(probe));
    p[i] = orig - step;
    const double down = loss_fn(static_cast<const NetParams&>(probe));
    p[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace dfm
