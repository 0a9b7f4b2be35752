#pragma once

// Analytic vs central-difference gradient comparison on the batch NLL of a
// small randomly initialized network.

#include <cstdint>
#include <string>
#include <vector>

namespace dfm {

struct GradCheckOptions {
  int data_dim = 2;
  int hidden = 8;
  int depth = 2;
  int mlp_hidden = 8;
  int batch = 4;
  double step = 1e-5;
  /// Relative errors are |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Test hook: when non-empty, the analytic gradient of this tensor is
  /// perturbed before comparison.
  std::string corrupt_tensor;
};

struct TensorGradError {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::uint64_t seed = 0;
  int data_dim = 0;
  std::vector<TensorGradError> tensors;
  double max_rel_error = 0.0;
};

double relative_error(double analytic, double numeric, double floor);

/// Throws InputDomainError if corrupt_tensor names no tensor.
GradCheckReport gradient_check(const GradCheckOptions& options, std::uint64_t seed);

}  // namespace dfm
