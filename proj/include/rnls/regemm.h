#pragma once

#include "rnls/lm_engine.h"
#include "rnls/problem.h"

namespace rnls {

struct RegemmOptions {
  SolveOptions base;
  double eta = 0.5;             // sufficient-decrease fraction in (0, 1)
  double sigma_bracket = 64.0;  // initial upper bracket, doubled while satisfied
  double sigma_cap = 65536.0;
  double bisect_rel_tol = 1e-3;
  double gap_tol = 1e-8;        // convergence also requires gap below this
  bool strict_gemm = false;     // per-iteration surrogate bound instead of the
                                // relaxed two-iterations-old one (ablation)
  bool kernel_value_weights = false;  // debug: u = psi(r/sigma) instead of omega
};

struct WeightUpdateResult {
  Eigen::VectorXd weights;  // u_i = omega(||r_i|| / sigma)
  double sigma = 1.0;
  bool capped = false;           // criterion still satisfied at sigma_cap
  double lifted_at_theta = 0.0;  // J-bar(theta, u(sigma)), the criterion LHS
  double bound = 0.0;            // eta J + (1 - eta) B_prev, the criterion RHS
};

// Largest sigma in [1, sigma_cap] whose partially-updated weights keep the
// lifted cost within the sufficient-decrease bound, found by bisection.
// Touching weights (sigma = 1) always satisfy the bound when
// bound_prev >= current_j, so the update is total.
WeightUpdateResult regemm_weight_update(const RobustKernel& kernel,
                                        const Eigen::VectorXd& norms,
                                        double current_j, double bound_prev,
                                        const RegemmOptions& options = {});

// Relaxed generalized majorization-minimization: alternate the partial weight
// update with one successful LM iteration on the weighted problem. Trace rows
// carry (psi, J-bar, gap, sigma) plus the criterion sides.
SolverTrace regemm_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                         const RegemmOptions& options = {});

}  // namespace rnls
