#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

#include "rnls/errors.h"

namespace rnls {

enum class KernelKind { smooth_truncated, quadratic, huber, cauchy };

// Symmetric robust kernel with unit curvature at zero: psi(0) = 0,
// psi''(0) = 1. tau is the truncation scale in residual units (pixels for
// bundle adjustment). The smooth truncated kernel is flat at tau^2/4 beyond
// r = tau; the other kinds are provided for solver comparisons only.
struct RobustKernel {
  KernelKind kind = KernelKind::smooth_truncated;
  double tau = 1.0;

  RobustKernel() = default;
  RobustKernel(KernelKind k, double tau_) : kind(k), tau(tau_) {
    if (!std::isfinite(tau) || tau <= 0.0)
      throw std::invalid_argument("RobustKernel: tau must be finite and > 0");
  }

  bool liftable() const { return kind == KernelKind::smooth_truncated; }
};

inline RobustKernel smooth_truncated_kernel(double tau) {
  return RobustKernel(KernelKind::smooth_truncated, tau);
}

namespace detail {
inline void check_residual(double r) {
  if (!std::isfinite(r))
    throw std::invalid_argument("kernel: non-finite residual");
}
}  // namespace detail

// Kernel value psi(|r|).
inline double psi(const RobustKernel& k, double r) {
  detail::check_residual(r);
  r = std::abs(r);
  const double t2 = k.tau * k.tau;
  switch (k.kind) {
    case KernelKind::smooth_truncated:
      if (r * r <= t2) return 0.5 * r * r * (1.0 - r * r / (2.0 * t2));
      return 0.25 * t2;
    case KernelKind::quadratic:
      return 0.5 * r * r;
    case KernelKind::huber:
      if (r <= k.tau) return 0.5 * r * r;
      return k.tau * r - 0.5 * t2;
    case KernelKind::cauchy:
      return 0.5 * t2 * std::log1p(r * r / t2);
  }
  return 0.0;  // unreachable
}

// Derivative psi'(|r|).
inline double psi_prime(const RobustKernel& k, double r) {
  detail::check_residual(r);
  r = std::abs(r);
  const double t2 = k.tau * k.tau;
  switch (k.kind) {
    case KernelKind::smooth_truncated:
      if (r <= k.tau) return r * (1.0 - r * r / t2);
      return 0.0;
    case KernelKind::quadratic:
      return r;
    case KernelKind::huber:
      return r <= k.tau ? r : k.tau;
    case KernelKind::cauchy:
      return r / (1.0 + r * r / t2);
  }
  return 0.0;
}

// IRLS weight omega(r) = psi'(r)/r, with the analytic limit omega(0) = 1
// (psi''(0) = 1 for every supported kind).
inline double omega(const RobustKernel& k, double r) {
  detail::check_residual(r);
  r = std::abs(r);
  const double t2 = k.tau * k.tau;
  switch (k.kind) {
    case KernelKind::smooth_truncated:
      return std::max(0.0, 1.0 - r * r / t2);
    case KernelKind::quadratic:
      return 1.0;
    case KernelKind::huber:
      return r <= k.tau ? 1.0 : k.tau / r;
    case KernelKind::cauchy:
      return 1.0 / (1.0 + r * r / t2);
  }
  return 1.0;
}

inline Eigen::VectorXd omega(const RobustKernel& k, const Eigen::VectorXd& r) {
  Eigen::VectorXd w(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) w[i] = omega(k, r[i]);
  return w;
}

// Half-quadratic bias function kappa(u) = tau^2/4 (u-1)^2 for the smooth
// truncated kernel; min_u (u/2) r^2 + kappa(u) recovers psi(|r|).
inline double kappa(const RobustKernel& k, double u) {
  if (!k.liftable())
    throw NotLiftableError("kappa: kernel kind has no bias function");
  if (!std::isfinite(u) || u < 0.0)
    throw std::invalid_argument("kappa: weight must be finite and >= 0");
  const double d = u - 1.0;
  return 0.25 * k.tau * k.tau * d * d;
}

// Per-residual lifted cost (u/2) r^2 + kappa(u).
inline double lifted_value(const RobustKernel& k, double u, double r) {
  detail::check_residual(r);
  return 0.5 * u * r * r + kappa(k, u);
}

// Scaled kernel psi_s(r) = s^2 psi(r/s); s = 1 is the identity and larger
// scales flatten the loss, which is the graduation mechanism.
inline double scaled_psi(const RobustKernel& k, double r, double s) {
  if (!std::isfinite(s) || s < 1.0)
    throw std::invalid_argument("scaled_psi: scale must be >= 1");
  return s * s * psi(k, r / s);
}

}  // namespace rnls
