#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

#include "rnls/errors.h"
#include "rnls/kernels.h"

namespace rnls {

// Deterministic, side-effect-free residual evaluator. `params` holds the
// value vector of each attached parameter block, in attachment order.
// When `jacobians` is non-null it receives one (dimension() x block-dim)
// matrix per attached block. Returns false when the residual cannot be
// evaluated at this point (e.g. a point behind the camera).
class ResidualFunction {
 public:
  virtual ~ResidualFunction() = default;
  virtual int dimension() const = 0;
  virtual bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                        Eigen::VectorXd& residual,
                        std::vector<Eigen::MatrixXd>* jacobians) const = 0;
};

// Convenience adapter for small/test residuals.
class FunctionResidual : public ResidualFunction {
 public:
  using Fn = std::function<bool(const std::vector<Eigen::Ref<const Eigen::VectorXd>>&,
                                Eigen::VectorXd&, std::vector<Eigen::MatrixXd>*)>;
  FunctionResidual(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  int dimension() const override { return dim_; }
  bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    return fn_(params, residual, jacobians);
  }

 private:
  int dim_;
  Fn fn_;
};

struct ParameterBlock {
  int id = 0;
  int dim = 0;
  Eigen::VectorXd values;  // initial values
};

struct ResidualBlock {
  int id = 0;
  std::vector<int> blocks;  // attached parameter block ids
  std::shared_ptr<const ResidualFunction> fn;
};

struct Objective {
  double value = 0.0;          // sum of psi(||r_i||)
  Eigen::VectorXd norms;       // per-residual ||r_i||, reusable by callers
};

struct JacobianCheckReport {
  struct Entry {
    int residual_id = 0;
    double max_rel_error = 0.0;
  };
  std::vector<Entry> entries;
  double max_rel_error = 0.0;
  bool passed = false;
};

// A robust least-squares problem: parameter blocks, residual blocks and a
// kernel. The solver state is a flat vector laid out block-by-block in id
// order; ParameterBlock::values provide the initial state.
class Problem {
 public:
  explicit Problem(RobustKernel kernel = RobustKernel()) : kernel_(kernel) {}

  int add_block(const Eigen::VectorXd& initial_values);
  int add_residual(std::shared_ptr<const ResidualFunction> fn, std::vector<int> blocks);

  const RobustKernel& kernel() const { return kernel_; }
  void set_kernel(const RobustKernel& k) { kernel_ = k; }

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int num_residuals() const { return static_cast<int>(residuals_.size()); }
  int block_dim(int id) const { return blocks_[id].dim; }
  int block_offset(int id) const { return offsets_[id]; }
  int dimension() const { return total_dim_; }
  const ResidualBlock& residual(int id) const { return residuals_[id]; }
  const ParameterBlock& block(int id) const { return blocks_[id]; }

  Eigen::VectorXd initial_state() const;

  // Optional hook applied to accepted iterates (e.g. axis-angle wrapping).
  void set_state_normalizer(std::function<void(Eigen::VectorXd&)> fn) {
    normalizer_ = std::move(fn);
  }
  void normalize_state(Eigen::VectorXd& theta) const {
    if (normalizer_) normalizer_(theta);
  }

  // Throws ValidationError when a residual references a missing block or the
  // problem is empty.
  void validate() const;

  // Evaluates one residual block; throws EvaluationError on failure or
  // non-finite output.
  void evaluate_block(int residual_id, const Eigen::VectorXd& theta,
                      Eigen::VectorXd& residual,
                      std::vector<Eigen::MatrixXd>* jacobians) const;

  // Robust objective sum_i psi(||r_i(theta)||).
  Objective evaluate_objective(const Eigen::VectorXd& theta) const;

  // Lifted upper bound sum_i (u_i/2)||r_i||^2 + kappa(u_i).
  double evaluate_weighted_sq(const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& weights) const;

  // Weighted half-squared norm sum_i (u_i/2)||r_i||^2 (no bias terms); this
  // is the quantity a fixed-weight LM step must decrease.
  double evaluate_weighted_halfsq(const Eigen::VectorXd& theta,
                                  const Eigen::VectorXd& weights) const;

  // Gradient of sum_i s^2 psi(||r_i||/s): sum_i omega(||r_i||/s) J_i^T r_i.
  Eigen::VectorXd robust_gradient(const Eigen::VectorXd& theta, double scale = 1.0) const;

  // Gradient of the weighted half-squared norm: sum_i u_i J_i^T r_i.
  Eigen::VectorXd weighted_gradient(const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& weights) const;

  // Compares analytic Jacobians against central finite differences with the
  // given step (relative to coordinate magnitude). A block's error is
  // ||J_an - J_fd||_inf / max(1, ||J_an||_inf).
  JacobianCheckReport check_jacobian(const Eigen::VectorXd& theta, double step,
                                     double tolerance) const;

 private:
  RobustKernel kernel_;
  std::vector<ParameterBlock> blocks_;
  std::vector<ResidualBlock> residuals_;
  std::vector<int> offsets_;
  int total_dim_ = 0;
  std::function<void(Eigen::VectorXd&)> normalizer_;
};

}  // namespace rnls
