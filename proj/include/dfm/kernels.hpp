#pragma once

// Dense double-precision inner loops used by the network, the metrics and
// the embedder. Every kernel has a scalar reference implementation and,
// where the target supports it, a SIMD variant (AVX2+FMA on x86-64, NEON on
// AArch64). The variant is picked once at startup from the CPU features and
// can be pinned with DFM_SIMD=scalar|avx2|neon or set_backend().
//
// SIMD variants reassociate sums, so results agree with the scalar kernels
// to rounding, not bit-for-bit. Within one backend everything is
// deterministic.

#include <cstddef>
#include <span>
#include <string_view>

namespace dfm::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// y = W x (+ bias when non-null); W is rows x cols, row-major.
  void (*gemv)(const double* w, const double* x, const double* bias, double* y, std::size_t rows,
               std::size_t cols);
  /// out += W^T g
  void (*gemv_t_acc)(const double* w, const double* g, double* out, std::size_t rows, std::size_t cols);
  /// G += g x^T
  void (*outer_acc)(const double* g, const double* x, double* grad, std::size_t rows, std::size_t cols);
  /// sum |a_i - b_i|
  double (*l1_distance)(const double* a, const double* b, std::size_t n);
  /// sum (a_i - b_i)^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
};

bool backend_supported(Backend b) noexcept;
const KernelTable& table(Backend b);
std::string_view backend_name(Backend b) noexcept;

Backend active_backend() noexcept;
/// Throws InputDomainError if the backend is not available on this CPU.
void set_backend(Backend b);

const KernelTable& active() noexcept;

// Span front-ends on the active backend. Sizes are checked.
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double l1_distance(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Table;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace dfm::kernels
