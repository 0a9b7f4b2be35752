#include <atomic>
#include <cstdlib>
#include <string>

#include "dfm/error.hpp"
#include "dfm/kernels.hpp"

namespace dfm::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend best_backend() noexcept {
  if (backend_supported(Backend::kAvx2)) return Backend::kAvx2;
  if (backend_supported(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

Backend initial_backend() noexcept {
  const char* env = std::getenv("DFM_SIMD");
  if (env != nullptr) {
    std::string_view want(env);
    for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
      if (want == backend_name(b) && backend_supported(b)) return b;
    }
  }
  return best_backend();
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) {
    throw InputDomainError("kernel size mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

bool backend_supported(Backend b) noexcept {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      return cpu_has_avx2();
#else
      return false;
#endif
    case Backend::kNeon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Backend b) {
  if (!backend_supported(b)) {
    throw InputDomainError("SIMD backend not available: " + std::string(backend_name(b)));
  }
  switch (b) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::kAvx2:
      return detail::kAvx2Table;
#endif
#if defined(__aarch64__)
    case Backend::kNeon:
      return detail::kNeonTable;
#endif
    default:
      return detail::kScalarTable;
  }
}

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
    case Backend::kNeon:
      return "neon";
  }
  return "unknown";
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  (void)table(b);
  current().store(b, std::memory_order_relaxed);
}

const KernelTable& active() noexcept { return table(active_backend()); }

double dot(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_sizes(x.size(), y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return active().l1_distance(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_sizes(a.size(), b.size());
  return active().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace dfm::kernels
