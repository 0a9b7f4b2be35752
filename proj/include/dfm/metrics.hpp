#pragma once

#include <span>
#include <vector>

#include "dfm/datagen.hpp"

namespace dfm {

/// Feature vector of one generated clip (raw sample or its embedding).
using ClipFeatures = std::vector<double>;

/// (1/D) * |y_i - y_j|_1
double pairwise_distance(std::span<const double> y_i, std::span<const double> y_j);

/// Mean pairwise distance over all K(K-1)/2 unordered pairs. K >= 2.
double timbre_consistency_loss(std::span<const ClipFeatures> group);

inline constexpr std::size_t kEnergyDistanceCap = 512;

/// 2 E|A-B| - E|A-A'| - E|B-B'| over all pairs of the empirical samples
/// (self-pairs included, so the value is >= 0 and 0 iff the multisets
/// coincide). Inputs longer than `cap` are truncated to their first `cap`
/// elements.
double energy_distance(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b,
                       std::size_t cap = kEnergyDistanceCap);

struct AttributeDeviation {
  double pitch = 0.0;
  double velocity = 0.0;
};

/// Mean |<x - centroid, axis> - requested offset| along the pitch and
/// velocity axes. Samples and conditions are paired by index.
AttributeDeviation attribute_deviation(std::span<const std::vector<double>> samples,
                                       std::span<const ConditionSet> conds, const DatasetSpec& spec);

}  // namespace dfm
