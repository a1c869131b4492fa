#include <doctest.h>

#include <cmath>
#include <random>

#include "rnls/kernels.h"

using namespace rnls;

TEST_CASE("smooth truncated kernel values") {
  const RobustKernel k = smooth_truncated_kernel(1.0);
  CHECK(psi(k, 0.0) == 0.0);
  CHECK(psi(k, 0.5) == doctest::Approx(0.109375).epsilon(1e-15));
  CHECK(psi(k, 2.0) == doctest::Approx(0.25).epsilon(1e-15));
  // Both branches agree exactly at the truncation boundary.
  CHECK(psi(k, 1.0) == 0.25);
  CHECK(psi(k, std::nextafter(1.0, 2.0)) == 0.25);
  CHECK(psi(k, -0.5) == psi(k, 0.5));  // symmetric
}

TEST_CASE("kernel derivative and weight function") {
  const RobustKernel k = smooth_truncated_kernel(1.0);
  CHECK(psi_prime(k, 0.0) == 0.0);
  CHECK(psi_prime(k, 0.5) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(psi_prime(k, 1.5) == 0.0);

  CHECK(omega(k, 0.0) == 1.0);
  CHECK(omega(k, 0.5) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(omega(k, 2.0) == 0.0);
  CHECK(omega(smooth_truncated_kernel(2.0), 1.0) == doctest::Approx(0.75));
}

TEST_CASE("bias function and lifted values") {
  CHECK(kappa(smooth_truncated_kernel(2.0), 1.0) == 0.0);
  CHECK(kappa(smooth_truncated_kernel(2.0), 0.0) == doctest::Approx(1.0));
  CHECK(kappa(smooth_truncated_kernel(1.0), 0.75) == doctest::Approx(0.015625));

  const RobustKernel k = smooth_truncated_kernel(1.0);
  CHECK(lifted_value(k, 0.75, 0.5) == doctest::Approx(0.109375));
  CHECK(lifted_value(k, 0.75, 0.5) == doctest::Approx(psi(k, 0.5)));
  CHECK(lifted_value(smooth_truncated_kernel(2.0), 1.0, 0.0) == 0.0);
  CHECK(lifted_value(k, 0.0, 5.0) == doctest::Approx(0.25));
}

TEST_CASE("kernel scaling") {
  const RobustKernel k = smooth_truncated_kernel(1.0);
  for (double r : {0.0, 0.3, 0.77, 1.0, 1.5, 4.0})
    CHECK(scaled_psi(k, r, 1.0) == psi(k, r));  // bit-identical at s = 1
  CHECK(scaled_psi(k, 2.0, 4.0) == doctest::Approx(1.75));
  CHECK(scaled_psi(k, 0.0, 3.0) == 0.0);

  // Non-decreasing in s for fixed r (the flattening property).
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> rr(0.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    const double r = rr(rng);
    double prev = psi(k, r);
    for (double s = 1.0; s < 32.0; s *= 1.37) {
      const double v = scaled_psi(k, r, s);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("kernel argument validation") {
  CHECK_THROWS_AS(smooth_truncated_kernel(0.0), std::invalid_argument);
  CHECK_THROWS_AS(smooth_truncated_kernel(-1.0), std::invalid_argument);
  const RobustKernel k = smooth_truncated_kernel(1.0);
  CHECK_THROWS_AS(psi(k, std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
  CHECK_THROWS_AS(psi(k, std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
  CHECK_THROWS_AS(scaled_psi(k, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(kappa(k, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(kappa(RobustKernel(KernelKind::huber, 1.0), 0.5),
                  NotLiftableError);
  CHECK_THROWS_AS(kappa(RobustKernel(KernelKind::cauchy, 1.0), 0.5),
                  NotLiftableError);
  CHECK_THROWS_AS(kappa(RobustKernel(KernelKind::quadratic, 1.0), 0.5),
                  NotLiftableError);
}

TEST_CASE("lifting duality: grid and closed form agree with psi") {
  std::mt19937 rng(123);
  for (double tau : {0.5, 1.0, 2.0}) {
    const RobustKernel k = smooth_truncated_kernel(tau);
    std::uniform_real_distribution<double> rr(0.0, 3.0 * tau);
    for (int i = 0; i < 200; ++i) {
      const double r = rr(rng);
      // Independent oracle: dense grid over u in [0, 1].
      double grid_min = std::numeric_limits<double>::infinity();
      double grid_arg = 0.0;
      for (int j = 0; j <= 10000; ++j) {
        const double u = j / 10000.0;
        const double v = lifted_value(k, u, r);
        if (v < grid_min) {
          grid_min = v;
          grid_arg = u;
        }
      }
      const double closed = lifted_value(k, omega(k, r), r);
      CHECK(std::abs(grid_min - psi(k, r)) < 1e-8);
      CHECK(std::abs(closed - psi(k, r)) < 1e-12);
      CHECK(std::abs(grid_arg - omega(k, r)) < 1.5e-4);
    }
  }
}

TEST_CASE("derivative consistency against central differences") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> rr(0.01, 3.0);
  for (KernelKind kind : {KernelKind::smooth_truncated, KernelKind::quadratic,
                          KernelKind::huber, KernelKind::cauchy}) {
    const RobustKernel k(kind, 1.3);
    for (int i = 0; i < 200; ++i) {
      const double r = rr(rng);
      if (std::abs(r - k.tau) < 1e-3) continue;  // second kink of huber
      const double h = 1e-6;
      const double fd = (psi(k, r + h) - psi(k, r - h)) / (2.0 * h);
      const double an = psi_prime(k, r);
      CHECK(std::abs(an - fd) < 1e-6 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("omega identity and monotonicity") {
  const RobustKernel k = smooth_truncated_kernel(1.7);
  double prev = omega(k, 0.0);
  for (double r = 1e-9; r < 6.0; r += 0.003) {
    CHECK(omega(k, r) * r == psi_prime(k, r));
    CHECK(omega(k, r) <= prev + 1e-15);
    prev = omega(k, r);
  }
}

TEST_CASE("unit curvature at zero for every kind") {
  for (KernelKind kind : {KernelKind::smooth_truncated, KernelKind::quadratic,
                          KernelKind::huber, KernelKind::cauchy}) {
    const RobustKernel k(kind, 1.1);
    const double eps = 1e-4;
    const double curvature =
        (psi(k, eps) + psi(k, -eps) - 2.0 * psi(k, 0.0)) / (eps * eps);
    CHECK(curvature == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("other kernel kinds take their standard values") {
  CHECK(psi(RobustKernel(KernelKind::quadratic, 1.0), 3.0) == doctest::Approx(4.5));
  CHECK(psi(RobustKernel(KernelKind::huber, 1.0), 2.0) == doctest::Approx(1.5));
  CHECK(psi(RobustKernel(KernelKind::cauchy, 1.0), 1.0) ==
        doctest::Approx(0.5 * std::log(2.0)));
  CHECK(omega(RobustKernel(KernelKind::huber, 1.0), 4.0) == doctest::Approx(0.25));
  CHECK(omega(RobustKernel(KernelKind::cauchy, 2.0), 2.0) == doctest::Approx(0.5));
}
