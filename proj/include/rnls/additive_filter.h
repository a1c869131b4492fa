#pragma once

#include "rnls/filter.h"
#include "rnls/lm_engine.h"
#include "rnls/problem.h"

namespace rnls {

struct AddFilterOptions {
  SolveOptions base;
  double mu_f = 0.9;
  double alpha = 0.01;
  int restoration_grid = 11;
  double h_feasible_tol = 1e-8;
};

// Residual-replication formulation solved with the same filter machinery:
//   f(x) = sum_i psi(||p_i||),  h(x) = sum_i ||p_i - r_i(theta)||^2,
// over x = [theta; p_1; ...; p_N].
class AdditiveProblem {
 public:
  AdditiveProblem(const Problem& problem, double mu_f, const LMConfig& lm = {});

  int theta_dim() const { return theta_dim_; }
  int num_residuals() const { return n_; }
  int joint_dim() const;
  double mu_f() const { return mu_f_; }
  double mu_h() const { return 1.0 - mu_f_; }
  const Problem& base() const { return *base_; }

  // p_i initialized to r_i(theta0), i.e. a feasible start.
  Eigen::VectorXd make_state(const Eigen::VectorXd& theta0) const;

  FilterPair eval_fh(const Eigen::VectorXd& x) const;
  void gradients(const Eigen::VectorXd& x, Eigen::VectorXd* g_f,
                 Eigen::VectorXd* g_h) const;
  Eigen::VectorXd cooperative_step(const Eigen::VectorXd& x, double lambda) const;
  // Moves p along r_i(theta) - p_i with grid-searched gamma over [0, 1/2];
  // snaps onto the residuals outright once h is below snap_tol.
  Eigen::VectorXd restoration_step(const Eigen::VectorXd& x, int grid_points,
                                   double snap_tol = 1e-8) const;

 private:
  const Problem* base_;
  Problem aug_;  // replica blocks [0, n), consistency blocks [n, 2n)
  double mu_f_;
  LMConfig lm_;
  int theta_dim_ = 0;
  int n_ = 0;
  std::vector<int> p_offset_;  // joint-state offset of each p_i
  std::vector<int> p_dim_;
};

SolverTrace addfilter_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                            const AddFilterOptions& options = {});

}  // namespace rnls
