#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dfm/error.hpp"
#include "dfm/kernels.hpp"
#include "dfm/rng.hpp"

namespace dfm::kernels {
namespace {

std::vector<Backend> available() {
  std::vector<Backend> out;
  for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon})
    if (backend_supported(b)) out.push_back(b);
  return out;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) { return rng.normal_vector(n); }

// Long-double references, written independently of the kernel sources.
long double ref_dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

double tol(std::size_t n) { return 1e-13 * (1.0 + static_cast<double>(n)); }

TEST(Kernels, ScalarAlwaysAvailable) {
  EXPECT_TRUE(backend_supported(Backend::kScalar));
  EXPECT_EQ(backend_name(Backend::kScalar), "scalar");
}

TEST(Kernels, UnsupportedBackendRejected) {
  for (Backend b : {Backend::kAvx2, Backend::kNeon})
    if (!backend_supported(b)) {
      EXPECT_THROW(set_backend(b), InputDomainError);
    }
}

TEST(Kernels, SpanFrontEndsCheckSizes) {
  std::vector<double> a(3), b(4);
  EXPECT_THROW(dot(a, b), InputDomainError);
  EXPECT_THROW(l1_distance(a, b), InputDomainError);
  EXPECT_THROW(squared_distance(a, b), InputDomainError);
  EXPECT_THROW(axpy(1.0, a, b), InputDomainError);
}

TEST(Kernels, ReductionsMatchReferenceOnEveryBackend) {
  Rng rng(11);
  for (Backend be : available()) {
    const KernelTable& k = table(be);
    for (std::size_t n = 0; n <= 67; ++n) {
      auto a = random_vec(rng, n), b = random_vec(rng, n);
      long double l1 = 0, sq = 0;
      for (std::size_t i = 0; i < n; ++i) {
        long double d = static_cast<long double>(a[i]) - b[i];
        l1 += std::fabs(d);
        sq += d * d;
      }
      EXPECT_NEAR(k.dot(a.data(), b.data(), n), static_cast<double>(ref_dot(a, b)), tol(n))
          << backend_name(be) << " n=" << n;
      EXPECT_NEAR(k.l1_distance(a.data(), b.data(), n), static_cast<double>(l1), tol(n));
      EXPECT_NEAR(k.squared_distance(a.data(), b.data(), n), static_cast<double>(sq), tol(n));
    }
  }
}

TEST(Kernels, MatrixKernelsMatchReferenceOnEveryBackend) {
  Rng rng(12);
  for (Backend be : available()) {
    const KernelTable& k = table(be);
    for (std::size_t rows : {1u, 3u, 4u, 5u, 9u, 17u}) {
      for (std::size_t cols : {1u, 2u, 4u, 7u, 16u, 33u}) {
        auto w = random_vec(rng, rows * cols);
        auto x = random_vec(rng, cols);
        auto g = random_vec(rng, rows);
        auto bias = random_vec(rng, rows);

        std::vector<double> y(rows), yb(rows);
        k.gemv(w.data(), x.data(), nullptr, y.data(), rows, cols);
        k.gemv(w.data(), x.data(), bias.data(), yb.data(), rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
          long double s = 0;
          for (std::size_t c = 0; c < cols; ++c) s += static_cast<long double>(w[r * cols + c]) * x[c];
          EXPECT_NEAR(y[r], static_cast<double>(s), tol(cols));
          EXPECT_NEAR(yb[r], static_cast<double>(s + bias[r]), tol(cols));
        }

        std::vector<double> out(cols, 0.5);
        k.gemv_t_acc(w.data(), g.data(), out.data(), rows, cols);
        for (std::size_t c = 0; c < cols; ++c) {
          long double s = 0.5;
          for (std::size_t r = 0; r < rows; ++r) s += static_cast<long double>(w[r * cols + c]) * g[r];
          EXPECT_NEAR(out[c], static_cast<double>(s), tol(rows));
        }

        std::vector<double> grad(rows * cols, 1.0);
        k.outer_acc(g.data(), x.data(), grad.data(), rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) EXPECT_NEAR(grad[r * cols + c], 1.0 + g[r] * x[c], 1e-14);
      }
    }
  }
}

TEST(Kernels, AxpyMatchesReference) {
  Rng rng(13);
  for (Backend be : available()) {
    for (std::size_t n = 0; n <= 19; ++n) {
      auto x = random_vec(rng, n), y = random_vec(rng, n);
      auto expect = y;
      for (std::size_t i = 0; i < n; ++i) expect[i] += 0.75 * x[i];
      table(be).axpy(0.75, x.data(), y.data(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y[i], expect[i], 1e-15);
    }
  }
}

TEST(Kernels, SimdAgreesWithScalar) {
  Rng rng(14);
  const KernelTable& s = table(Backend::kScalar);
  for (Backend be : available()) {
    if (be == Backend::kScalar) continue;
    const KernelTable& k = table(be);
    for (std::size_t n : {1u, 3u, 8u, 31u, 128u, 1000u}) {
      auto a = random_vec(rng, n), b = random_vec(rng, n);
      EXPECT_NEAR(k.dot(a.data(), b.data(), n), s.dot(a.data(), b.data(), n), tol(n));
      EXPECT_NEAR(k.l1_distance(a.data(), b.data(), n), s.l1_distance(a.data(), b.data(), n), tol(n));
      EXPECT_NEAR(k.squared_distance(a.data(), b.data(), n), s.squared_distance(a.data(), b.data(), n), tol(n));
    }
  }
}

TEST(Kernels, SetBackendSwitchesActiveTable) {
  Backend before = active_backend();
  for (Backend be : available()) {
    set_backend(be);
    EXPECT_EQ(active_backend(), be);
    EXPECT_EQ(&active(), &table(be));
  }
  set_backend(before);
}

}  // namespace
}  // namespace dfm::kernels
