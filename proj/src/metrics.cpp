#include "dfm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dfm/error.hpp"
#include "dfm/kernels.hpp"

namespace dfm {

double pairwise_distance(std::span<const double> y_i, std::span<const double> y_j) {
  if (y_i.size() != y_j.size()) throw InputDomainError("feature length mismatch");
  if (y_i.empty()) throw InputDomainError("empty feature vector");
  return kernels::l1_distance(y_i, y_j) / static_cast<double>(y_i.size());
}

double timbre_consistency_loss(std::span<const ClipFeatures> group) {
  const std::size_t k = group.size();
  if (k < 2) throw InputDomainError("timbre consistency needs at least two clips");
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) sum += pairwise_distance(group[i], group[j]);
  }
  return 2.0 * sum / (static_cast<double>(k) * static_cast<double>(k - 1));
}

namespace {

double mean_cross_distance(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b) {
  const auto& k = kernels::active();
  double sum = 0.0;
  for (const auto& x : a) {
    if (x.size() != b.front().size()) throw InputDomainError("sample dimension mismatch");
    for (const auto& y : b) sum += std::sqrt(k.squared_distance(x.data(), y.data(), x.size()));
  }
  return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

}  // namespace

double energy_distance(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b,
                       std::size_t cap) {
  if (a.empty() || b.empty()) throw InputDomainError("energy distance needs non-empty sample sets");
  if (cap == 0) throw InputDomainError("sample cap must be positive");
  a = a.first(std::min(a.size(), cap));
  b = b.first(std::min(b.size(), cap));
  const double value = 2.0 * mean_cross_distance(a, b) - mean_cross_distance(a, a) - mean_cross_distance(b, b);
  // Exact zero for coinciding multisets can come out as -1e-17.
  return std::max(0.0, value);
}

AttributeDeviation attribute_deviation(std::span<const std::vector<double>> samples,
                                       std::span<const ConditionSet> conds, const DatasetSpec& spec) {
  if (samples.size() != conds.size()) throw InputDomainError("samples and conditions differ in length");
  AttributeDeviation dev;
  if (samples.empty()) return dev;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ConditionSet& c = conds[i];
    spec.check_condition(c);
    const auto& centroid = spec.class_centroids[static_cast<std::size_t>(c.class_id)];
    if (samples[i].size() != centroid.size()) throw InputDomainError("sample dimension mismatch");
    double p = 0.0, v = 0.0;
    for (std::size_t j = 0; j < centroid.size(); ++j) {
      const double r = samples[i][j] - centroid[j];
      p += r * spec.pitch_axis[j];
      v += r * spec.velocity_axis[j];
    }
    dev.pitch += std::abs(p - spec.pitch_offsets[static_cast<std::size_t>(c.pitch_id)]);
    dev.velocity += std::abs(v - spec.velocity_offsets[static_cast<std::size_t>(c.velocity_id)]);
  }
  dev.pitch /= static_cast<double>(samples.size());
  dev.velocity /= static_cast<double>(samples.size());
  return dev;
}

}  // namespace dfm
