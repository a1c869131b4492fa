#pragma once

// Internal: the Alg.-style filter loop shared by the kernel-scaling and
// residual-replication solvers. Each iteration pushes a margin-shifted
// temporary filter entry, tries a damped cooperative step, falls back to a
// restoration step when the filter rejects it, and resolves the temporary
// entry on the objective change.

#include <Eigen/Core>

#include "rnls/filter.h"
#include "rnls/lm_engine.h"

namespace rnls {
namespace detail {

class FilterStepper {
 public:
  virtual ~FilterStepper() = default;
  virtual FilterPair eval_fh(const Eigen::VectorXd& x) const = 0;
  // Candidate x + delta from the damped joint solve; may throw
  // SingularSystemError or EvaluationError.
  virtual Eigen::VectorXd cooperative(const Eigen::VectorXd& x, double lambda) const = 0;
  virtual Eigen::VectorXd restoration(const Eigen::VectorXd& x) const = 0;
  // Gradient whose vanishing (together with h below tolerance) certifies
  // stationarity of the constrained problem.
  virtual Eigen::VectorXd stationarity_gradient(const Eigen::VectorXd& x) const = 0;
  virtual double psi_unscaled(const Eigen::VectorXd& x) const = 0;
  virtual double inlier(const Eigen::VectorXd& x, double threshold) const = 0;
  virtual void normalize(Eigen::VectorXd& x) const = 0;
};

struct FilterLoopOptions {
  SolveOptions base;
  double alpha = 0.01;
  double h_feasible_tol = 1e-8;
  // Ceiling for damping growth on the restoration branch. Restoration-heavy
  // phases would otherwise ratchet lambda to lambda_max, where the
  // cooperative step can no longer produce a margin-sized decrease and the
  // loop wedges.
  double restoration_lambda_cap = 1e6;
};

SolverTrace filter_method_solve(const FilterStepper& stepper, Eigen::VectorXd x0,
                                const FilterLoopOptions& options);

}  // namespace detail
}  // namespace rnls
