#include "dfm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dfm/error.hpp"

namespace dfm {
namespace {

constexpr double kCentroidRadius = 3.0;
constexpr double kPitchSpacing = 0.1;
constexpr double kVelocitySpacing = 0.15;

std::vector<double> basis(int d, int i) {
  std::vector<double> e(static_cast<std::size_t>(d), 0.0);
  e[static_cast<std::size_t>(std::min(i, d - 1))] = 1.0;
  return e;
}

std::vector<double> centered_offsets(int n, double spacing) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = spacing * (i - 0.5 * (n - 1));
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

DatasetSpec DatasetSpec::make(int data_dim, int num_classes, int num_pitches, int num_velocities, double sigma_data,
                              std::uint64_t seed) {
  DatasetSpec s;
  s.data_dim = data_dim;
  s.num_classes = num_classes;
  s.num_pitches = num_pitches;
  s.num_velocities = num_velocities;
  s.sigma_data = sigma_data;
  s.seed = seed;
  for (int k = 0; k < num_classes; ++k) {
    std::vector<double> c(static_cast<std::size_t>(data_dim), 0.0);
    if (data_dim == 1) {
      c[0] = kCentroidRadius * (k - 0.5 * (num_classes - 1));
    } else {
      const double angle = 2.0 * std::numbers::pi * k / num_classes + std::numbers::pi / 4.0;
      c[0] = kCentroidRadius * std::cos(angle);
      c[1] = kCentroidRadius * std::sin(angle);
    }
    s.class_centroids.push_back(std::move(c));
  }
  s.pitch_axis = basis(data_dim, 0);
  s.velocity_axis = basis(data_dim, 1);
  s.ambiguity_axis = basis(data_dim, 2);
  s.pitch_offsets = centered_offsets(num_pitches, kPitchSpacing);
  s.velocity_offsets = centered_offsets(num_velocities, kVelocitySpacing);
  return s;
}

DatasetSpec DatasetSpec::default_spec(std::uint64_t seed) { return make(2, 4, 12, 3, 0.1, seed); }

DatasetSpec DatasetSpec::bimodal_fixture(std::uint64_t seed) {
  DatasetSpec s = make(1, 1, 1, 1, 0.05, seed);
  s.modes_per_condition = 2;
  s.bimodal_separation = 2.0;
  return s;
}

void DatasetSpec::validate() const {
  auto fail = [](const std::string& msg) { throw InputDomainError("invalid dataset spec: " + msg); };
  if (data_dim < 1 || num_classes < 1 || num_pitches < 1 || num_velocities < 1) fail("non-positive size");
  if (!(sigma_data > 0.0) || !std::isfinite(sigma_data)) fail("sigma_data must be positive");
  if (modes_per_condition != 1 && modes_per_condition != 2) fail("modes_per_condition must be 1 or 2");
  if (modes_per_condition == 2 && !(bimodal_separation > 0.0)) fail("bimodal separation must be positive");
  if (class_centroids.size() != static_cast<std::size_t>(num_classes)) fail("centroid count != num_classes");
  const auto d = static_cast<std::size_t>(data_dim);
  for (const auto& c : class_centroids) {
    if (c.size() != d) fail("centroid dimension mismatch");
  }
  for (std::size_t i = 0; i < class_centroids.size(); ++i) {
    for (std::size_t j = i + 1; j < class_centroids.size(); ++j) {
      if (class_centroids[i] == class_centroids[j]) fail("centroids must be distinct");
    }
  }
  for (const auto* axis : {&pitch_axis, &velocity_axis, &ambiguity_axis}) {
    if (axis->size() != d) fail("axis dimension mismatch");
    if (std::abs(norm(*axis) - 1.0) > 1e-9) fail("axes must be unit norm");
  }
  if (pitch_offsets.size() != static_cast<std::size_t>(num_pitches)) fail("pitch offset count != num_pitches");
  if (velocity_offsets.size() != static_cast<std::size_t>(num_velocities)) {
    fail("velocity offset count != num_velocities");
  }
  for (std::size_t i = 1; i < pitch_offsets.size(); ++i) {
    if (!(pitch_offsets[i] > pitch_offsets[i - 1])) fail("pitch offsets must be strictly increasing");
  }
}

void DatasetSpec::check_condition(const ConditionSet& cond) const {
  if (cond.class_id < 0 || cond.class_id >= num_classes || cond.pitch_id < 0 || cond.pitch_id >= num_pitches ||
      cond.velocity_id < 0 || cond.velocity_id >= num_velocities) {
    throw InputDomainError("condition out of dataset bounds");
  }
}

std::vector<double> DatasetSpec::condition_mean(const ConditionSet& cond) const {
  check_condition(cond);
  std::vector<double> m = class_centroids[static_cast<std::size_t>(cond.class_id)];
  const double po = pitch_offsets[static_cast<std::size_t>(cond.pitch_id)];
  const double vo = velocity_offsets[static_cast<std::size_t>(cond.velocity_id)];
  for (std::size_t i = 0; i < m.size(); ++i) m[i] += po * pitch_axis[i] + vo * velocity_axis[i];
  return m;
}

std::vector<ConditionSet> DatasetSpec::all_conditions() const {
  std::vector<ConditionSet> out;
  for (int c = 0; c < num_classes; ++c) {
    for (int p = 0; p < num_pitches; ++p) {
      for (int v = 0; v < num_velocities; ++v) out.push_back({c, p, v});
    }
  }
  return out;
}

double DatasetSpec::min_centroid_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < class_centroids.size(); ++i) {
    for (std::size_t j = i + 1; j < class_centroids.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < class_centroids[i].size(); ++k) {
        const double diff = class_centroids[i][k] - class_centroids[j][k];
        s += diff * diff;
      }
      best = std::min(best, std::sqrt(s));
    }
  }
  return best;
}

namespace {

NoteSample draw(const DatasetSpec& spec, const ConditionSet& cond, int mode_sign, Rng& rng) {
  NoteSample s{spec.condition_mean(cond), cond};
  const double shift = spec.modes_per_condition == 2 ? 0.5 * spec.bimodal_separation * mode_sign : 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    s.x[i] += shift * spec.ambiguity_axis[i] + spec.sigma_data * rng.normal();
  }
  return s;
}

}  // namespace

std::vector<NoteSample> make_dataset(const DatasetSpec& spec, int n_per_condition) {
  spec.validate();
  if (n_per_condition < 1) throw InputDomainError("n_per_condition must be >= 1");
  std::vector<NoteSample> out;
  const auto conds = spec.all_conditions();
  out.reserve(conds.size() * static_cast<std::size_t>(n_per_condition));
  const Rng root = Rng(spec.seed).child(0xda7a);
  for (std::size_t ci = 0; ci < conds.size(); ++ci) {
    Rng rng = root.child(ci);
    for (int i = 0; i < n_per_condition; ++i) out.push_back(draw(spec, conds[ci], i % 2 == 0 ? 1 : -1, rng));
  }
  return out;
}

NoteSample ground_truth_sampler(const DatasetSpec& spec, const ConditionSet& cond, Rng& rng) {
  spec.check_condition(cond);
  const int sign = spec.modes_per_condition == 2 ? (rng.coin() ? 1 : -1) : 1;
  return draw(spec, cond, sign, rng);
}

}  // namespace dfm
