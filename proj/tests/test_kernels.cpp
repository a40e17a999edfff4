#include <stdexcept>
#include <cmath>
#include <random>
#include <vector>

#include "cachelab/kernels.hpp"
#include "doctest.h"

using namespace cachelab;

namespace {

std::vector<double> random_vec(size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

bool close(double a, double b, double tol = 1e-12) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

TEST_CASE("scalar kernels match naive definitions") {
  std::mt19937_64 rng(1);
  const size_t rows = 7, cols = 13;
  const auto a = random_vec(rows * cols, rng);
  const auto x = random_vec(cols, rng);
  const auto xr = random_vec(rows, rng);
  const auto b = random_vec(rows, rng);

  SUBCASE("dot") {
    double want = 0;
    for (size_t i = 0; i < cols; ++i) want += x[i] * a[i];
    CHECK(close(kernels::scalar::dot(x.data(), a.data(), cols), want));
  }

  SUBCASE("axpy") {
    auto y = random_vec(cols, rng);
    const auto y0 = y;
    kernels::scalar::axpy(0.5, x.data(), y.data(), cols);
    for (size_t i = 0; i < cols; ++i) CHECK(close(y[i], y0[i] + 0.5 * x[i]));
  }

  SUBCASE("gemv with and without bias") {
    std::vector<double> y(rows), y_nobias(rows);
    kernels::scalar::gemv(a.data(), x.data(), b.data(), y.data(), rows, cols);
    kernels::scalar::gemv(a.data(), x.data(), nullptr, y_nobias.data(), rows, cols);
    for (size_t r = 0; r < rows; ++r) {
      double want = b[r];
      for (size_t c = 0; c < cols; ++c) want += a[r * cols + c] * x[c];
      CHECK(close(y[r], want));
      CHECK(close(y_nobias[r], want - b[r]));
    }
  }

  SUBCASE("gemv_transposed_acc accumulates A^T x") {
    auto y = random_vec(cols, rng);
    const auto y0 = y;
    kernels::scalar::gemv_transposed_acc(a.data(), xr.data(), y.data(), rows, cols);
    for (size_t c = 0; c < cols; ++c) {
      double want = y0[c];
      for (size_t r = 0; r < rows; ++r) want += a[r * cols + c] * xr[r];
      CHECK(close(y[c], want));
    }
  }

  SUBCASE("ger_acc accumulates a rank-1 update") {
    auto m = random_vec(rows * cols, rng);
    const auto m0 = m;
    kernels::scalar::ger_acc(1.5, xr.data(), x.data(), m.data(), rows, cols);
    for (size_t r = 0; r < rows; ++r) {
      for (size_t c = 0; c < cols; ++c) {
        CHECK(close(m[r * cols + c], m0[r * cols + c] + 1.5 * xr[r] * x[c]));
      }
    }
  }
}

#if defined(__x86_64__)
TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) {
    return;  // nothing to compare on this machine
  }
  std::mt19937_64 rng(2);
  // Cover remainders around the 4-wide vector width, including tiny sizes.
  for (size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 127u}) {
    const auto x = random_vec(n, rng);
    const auto y = random_vec(n, rng);
    CHECK(close(kernels::avx2::dot(x.data(), y.data(), n),
                kernels::scalar::dot(x.data(), y.data(), n), 1e-12));

    auto ys = y, yv = y;
    kernels::scalar::axpy(0.77, x.data(), ys.data(), n);
    kernels::avx2::axpy(0.77, x.data(), yv.data(), n);
    for (size_t i = 0; i < n; ++i) CHECK(close(ys[i], yv[i]));

    std::vector<double> hs(n), hv(n);
    kernels::scalar::hadamard(x.data(), y.data(), hs.data(), n);
    kernels::avx2::hadamard(x.data(), y.data(), hv.data(), n);
    for (size_t i = 0; i < n; ++i) CHECK(close(hs[i], hv[i]));
  }

  for (size_t rows : {1u, 3u, 8u, 17u}) {
    for (size_t cols : {1u, 5u, 16u, 33u}) {
      const auto a = random_vec(rows * cols, rng);
      const auto x = random_vec(cols, rng);
      const auto xr = random_vec(rows, rng);
      const auto b = random_vec(rows, rng);

      std::vector<double> ys(rows), yv(rows);
      kernels::scalar::gemv(a.data(), x.data(), b.data(), ys.data(), rows, cols);
      kernels::avx2::gemv(a.data(), x.data(), b.data(), yv.data(), rows, cols);
      for (size_t i = 0; i < rows; ++i) CHECK(close(ys[i], yv[i]));

      auto ts = x, tv = x;
      kernels::scalar::gemv_transposed_acc(a.data(), xr.data(), ts.data(), rows, cols);
      kernels::avx2::gemv_transposed_acc(a.data(), xr.data(), tv.data(), rows, cols);
      for (size_t i = 0; i < cols; ++i) CHECK(close(ts[i], tv[i]));

      auto ms = a, mv = a;
      kernels::scalar::ger_acc(-0.3, xr.data(), x.data(), ms.data(), rows, cols);
      kernels::avx2::ger_acc(-0.3, xr.data(), x.data(), mv.data(), rows, cols);
      for (size_t i = 0; i < rows * cols; ++i) CHECK(close(ms[i], mv[i]));
    }
  }
}
#endif

TEST_CASE("dispatch table can be forced to either backend") {
  kernels::force_backend("scalar");
  CHECK(std::string(kernels::active().backend) == "scalar");
  const double x[] = {1.0, 2.0, 3.0};
  const double y[] = {4.0, 5.0, 6.0};
  CHECK(kernels::dot(x, y, 3) == doctest::Approx(32.0));

#if defined(__x86_64__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    kernels::force_backend("avx2");
    CHECK(std::string(kernels::active().backend) == "avx2");
    CHECK(kernels::dot(x, y, 3) == doctest::Approx(32.0));
  }
#endif
  kernels::force_backend("scalar");
  CHECK_THROWS_AS(kernels::force_backend("no-such-backend"), std::invalid_argument);
}
