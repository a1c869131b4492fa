#pragma once

#include "rnls/filter.h"
#include "rnls/lm_engine.h"
#include "rnls/problem.h"

namespace rnls {

struct AskerOptions {
  SolveOptions base;
  double mu_f = 0.9;  // objective weight in the cooperative step; mu_h = 1 - mu_f
  double alpha = 0.01;         // filter margin
  double s_init = 5.0;         // initial per-residual scale variable
  int restoration_grid = 11;   // gamma samples over [0, 1/2]
  double h_feasible_tol = 1e-10;
  // Per-iteration trust bounds on each scale factor: the cooperative step may
  // shrink sigma_i = 1 + s_i^2 by at most sigma_trust and grow it by at most
  // sigma_growth. The undamped joint solve otherwise collapses the scales to
  // feasibility in one step (the constraint gradient 2s dwarfs the kernel
  // term far from sigma = 1), destroying the graduation, while uncapped
  // growth lets borderline residuals re-inflate their scales indefinitely
  // and keeps h bouncing above zero. Near sigma = 1 the shrink bound is
  // vacuous, so feasibility attainment stays fast. sigma_trust = 0 disables
  // both bounds.
  double sigma_trust = 0.75;
  double sigma_growth = 1.05;
  // Restoration zeroes all scales once max_i s_i^2 falls below this, i.e.
  // every kernel is within a factor scale_snap of unscaled; the filter-margin
  // squeeze alone approaches exact feasibility only asymptotically.
  double scale_snap = 0.02;
};

// Joint (theta, s) view of the per-residual kernel-scaling formulation
//   f(x) = sum_i psi(||r_i(theta)|| / (1 + s_i^2)),  h(x) = sum_i s_i^2.
// The state is x = [theta; s]. Step computations are exposed for tests.
class AskerProblem {
 public:
  AskerProblem(const Problem& problem, double mu_f, const LMConfig& lm = {});

  int theta_dim() const { return theta_dim_; }
  int num_residuals() const { return n_; }
  int joint_dim() const { return theta_dim_ + n_; }
  double mu_f() const { return mu_f_; }
  double mu_h() const { return 1.0 - mu_f_; }
  const Problem& base() const { return *base_; }
  const Problem& augmented() const { return aug_; }

  Eigen::VectorXd make_state(const Eigen::VectorXd& theta0, double s_init) const;

  FilterPair eval_fh(const Eigen::VectorXd& x) const;

  // Exact joint gradients of f and h.
  void gradients(const Eigen::VectorXd& x, Eigen::VectorXd* g_f,
                 Eigen::VectorXd* g_h) const;

  // Damped joint Gauss-Newton candidate
  //   x - (mu_f H_f + mu_h H_h + lambda I)^{-1} (mu_f g_f + mu_h g_h).
  // When sigma_trust binds on some coordinate, the s-update is clamped and
  // the theta block is re-solved with the clamped s-step substituted in.
  Eigen::VectorXd cooperative_step(const Eigen::VectorXd& x, double lambda,
                                   double sigma_trust = 0.75,
                                   double sigma_growth = 1.05) const;

  // Candidate (theta, (1 - gamma) s) with gamma picked on a uniform grid over
  // [0, 1/2] to minimize the angle between g_f and g_h at the displaced
  // point; zeroes the scales outright once max_i s_i^2 <= snap_below.
  Eigen::VectorXd restoration_step(const Eigen::VectorXd& x, int grid_points,
                                   double snap_below = 0.02) const;

 private:
  const Problem* base_;
  Problem aug_;  // scaled residual blocks [0, n), scale penalty blocks [n, 2n)
  double mu_f_;
  LMConfig lm_;
  int theta_dim_ = 0;
  int n_ = 0;
};

// Filter-governed adaptive kernel scaling. Trace rows carry
// (psi, f as aux, h, lambda, step kind); psi is the unscaled objective.
SolverTrace asker_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                        const AskerOptions& options = {});

}  // namespace rnls
