#pragma once

// Synthetic conditional "instruments": each (class, pitch, velocity) triple
// is an isotropic Gaussian around
//   class_centroid + pitch_offset * pitch_axis + velocity_offset * velocity_axis,
// optionally split into two modes at +/- separation/2 along an ambiguity axis.

#include <cstdint>
#include <vector>

#include "dfm/rng.hpp"
#include "dfm/types.hpp"

namespace dfm {

struct DatasetSpec {
  int data_dim = 2;
  int num_classes = 4;
  int num_pitches = 12;
  int num_velocities = 3;
  std::vector<std::vector<double>> class_centroids;
  std::vector<double> pitch_axis;
  std::vector<double> pitch_offsets;
  std::vector<double> velocity_axis;
  std::vector<double> velocity_offsets;
  std::vector<double> ambiguity_axis;
  double sigma_data = 0.1;
  int modes_per_condition = 1;
  double bimodal_separation = 0.0;
  std::uint64_t seed = 0;

  /// d=2, C=4, P=12, V=3, sigma_data=0.1; centroids on a radius-3 circle,
  /// pitch offsets 0.1 apart along e0, velocity offsets 0.15 apart along e1.
  static DatasetSpec default_spec(std::uint64_t seed = 0);
  /// One condition in d=1 with modes at -1 and +1 (separation 2),
  /// sigma_data=0.05.
  static DatasetSpec bimodal_fixture(std::uint64_t seed = 0);
  /// Same layout rules as default_spec for arbitrary sizes.
  static DatasetSpec make(int data_dim, int num_classes, int num_pitches, int num_velocities,
                          double sigma_data, std::uint64_t seed);

  /// Throws InputDomainError on any violated invariant.
  void validate() const;
  void check_condition(const ConditionSet& cond) const;
  /// Mean of the condition's distribution (midpoint of both modes when bimodal).
  std::vector<double> condition_mean(const ConditionSet& cond) const;
  std::vector<ConditionSet> all_conditions() const;
  double min_centroid_distance() const;

  bool operator==(const DatasetSpec&) const = default;
};

struct NoteSample {
  std::vector<double> x;
  ConditionSet cond;
};

/// n_per_condition draws for every condition, in (class, pitch, velocity)
/// lexicographic order. Bimodal specs alternate +/- modes (even index +).
std::vector<NoteSample> make_dataset(const DatasetSpec& spec, int n_per_condition);

/// One draw from the exact conditional distribution (mode picked by a fair coin).
NoteSample ground_truth_sampler(const DatasetSpec& spec, const ConditionSet& cond, Rng& rng);

}  // namespace dfm
