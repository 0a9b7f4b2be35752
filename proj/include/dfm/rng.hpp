#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dfm {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

/// Seeded random stream.
///
/// Child streams are derived from the seed alone (not from the engine
/// state), so `child(k)` is the same stream no matter how many numbers the
/// parent has already produced. This is what lets candidates, notes and
/// steps be generated in any order with identical results.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  Rng child(std::uint64_t tag) const { return Rng(mix_seed(seed_, tag)); }

  double normal() { return normal_(engine_); }
  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
  }
  std::vector<double> normal_vector(std::size_t n) {
    std::vector<double> v(n);
    fill_normal(v);
    return v;
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  bool coin() { return std::bernoulli_distribution(0.5)(engine_); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dfm
