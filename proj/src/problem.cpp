#include "rnls/problem.h"

#include <cmath>
#include <string>

namespace rnls {

int Problem::add_block(const Eigen::VectorXd& initial_values) {
  if (initial_values.size() == 0)
    throw std::invalid_argument("add_block: empty parameter block");
  ParameterBlock b;
  b.id = static_cast<int>(blocks_.size());
  b.dim = static_cast<int>(initial_values.size());
  b.values = initial_values;
  offsets_.push_back(total_dim_);
  total_dim_ += b.dim;
  blocks_.push_back(std::move(b));
  return blocks_.back().id;
}

int Problem::add_residual(std::shared_ptr<const ResidualFunction> fn,
                          std::vector<int> blocks) {
  if (!fn) throw std::invalid_argument("add_residual: null function");
  ResidualBlock r;
  r.id = static_cast<int>(residuals_.size());
  r.blocks = std::move(blocks);
  r.fn = std::move(fn);
  residuals_.push_back(std::move(r));
  return residuals_.back().id;
}

Eigen::VectorXd Problem::initial_state() const {
  Eigen::VectorXd theta(total_dim_);
  for (const auto& b : blocks_) theta.segment(offsets_[b.id], b.dim) = b.values;
  return theta;
}

void Problem::validate() const {
  if (residuals_.empty()) throw ValidationError("problem has no residual blocks");
  for (const auto& r : residuals_) {
    if (r.blocks.empty())
      throw ValidationError("residual block " + std::to_string(r.id) +
                            " attaches no parameter blocks");
    for (int id : r.blocks)
      if (id < 0 || id >= num_blocks())
        throw ValidationError("residual block " + std::to_string(r.id) +
                              " references unknown parameter block " +
                              std::to_string(id));
  }
}

void Problem::evaluate_block(int residual_id, const Eigen::VectorXd& theta,
                             Eigen::VectorXd& residual,
                             std::vector<Eigen::MatrixXd>* jacobians) const {
  const ResidualBlock& rb = residuals_[residual_id];
  std::vector<Eigen::Ref<const Eigen::VectorXd>> params;
  params.reserve(rb.blocks.size());
  for (int id : rb.blocks)
    params.emplace_back(theta.segment(offsets_[id], blocks_[id].dim));

  residual.resize(rb.fn->dimension());
  if (jacobians) jacobians->resize(rb.blocks.size());
  if (!rb.fn->evaluate(params, residual, jacobians))
    throw EvaluationError(residual_id, "residual block " + std::to_string(residual_id) +
                                           " failed to evaluate");
  if (!residual.allFinite())
    throw EvaluationError(residual_id, "residual block " + std::to_string(residual_id) +
                                           " produced non-finite values");
  if (jacobians)
    for (const auto& J : *jacobians)
      if (!J.allFinite())
        throw EvaluationError(residual_id,
                              "residual block " + std::to_string(residual_id) +
                                  " produced a non-finite Jacobian");
}

Objective Problem::evaluate_objective(const Eigen::VectorXd& theta) const {
  Objective out;
  out.norms.resize(num_residuals());
  Eigen::VectorXd r;
  for (int i = 0; i < num_residuals(); ++i) {
    evaluate_block(i, theta, r, nullptr);
    out.norms[i] = r.norm();
    out.value += psi(kernel_, out.norms[i]);
  }
  return out;
}

double Problem::evaluate_weighted_sq(const Eigen::VectorXd& theta,
                                     const Eigen::VectorXd& weights) const {
  if (weights.size() != num_residuals())
    throw std::invalid_argument("evaluate_weighted_sq: weight count mismatch");
  double total = 0.0;
  Eigen::VectorXd r;
  for (int i = 0; i < num_residuals(); ++i) {
    evaluate_block(i, theta, r, nullptr);
    total += lifted_value(kernel_, weights[i], r.norm());
  }
  return total;
}

double Problem::evaluate_weighted_halfsq(const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& weights) const {
  if (weights.size() != num_residuals())
    throw std::invalid_argument("evaluate_weighted_halfsq: weight count mismatch");
  double total = 0.0;
  Eigen::VectorXd r;
  for (int i = 0; i < num_residuals(); ++i) {
    evaluate_block(i, theta, r, nullptr);
    total += 0.5 * weights[i] * r.squaredNorm();
  }
  return total;
}

Eigen::VectorXd Problem::robust_gradient(const Eigen::VectorXd& theta,
                                         double scale) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(total_dim_);
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> jacs;
  for (int i = 0; i < num_residuals(); ++i) {
    evaluate_block(i, theta, r, &jacs);
    const double w = omega(kernel_, r.norm() / scale);
    if (w == 0.0) continue;
    const ResidualBlock& rb = residuals_[i];
    for (size_t k = 0; k < rb.blocks.size(); ++k) {
      const int id = rb.blocks[k];
      g.segment(offsets_[id], blocks_[id].dim).noalias() += w * jacs[k].transpose() * r;
    }
  }
  return g;
}

Eigen::VectorXd Problem::weighted_gradient(const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& weights) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(total_dim_);
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> jacs;
  for (int i = 0; i < num_residuals(); ++i) {
    if (weights[i] == 0.0) continue;
    evaluate_block(i, theta, r, &jacs);
    const ResidualBlock& rb = residuals_[i];
    for (size_t k = 0; k < rb.blocks.size(); ++k) {
      const int id = rb.blocks[k];
      g.segment(offsets_[id], blocks_[id].dim).noalias() +=
          weights[i] * jacs[k].transpose() * r;
    }
  }
  return g;
}

JacobianCheckReport Problem::check_jacobian(const Eigen::VectorXd& theta,
                                            double step, double tolerance) const {
  if (!(step > 0.0) || step > 1e-2)
    throw std::invalid_argument("check_jacobian: step must be in (0, 1e-2]");
  JacobianCheckReport report;
  Eigen::VectorXd r0, rp, rm;
  std::vector<Eigen::MatrixXd> jacs;
  Eigen::VectorXd work = theta;
  for (int i = 0; i < num_residuals(); ++i) {
    evaluate_block(i, theta, r0, &jacs);
    const ResidualBlock& rb = residuals_[i];
    double err = 0.0;
    for (size_t k = 0; k < rb.blocks.size(); ++k) {
      const int id = rb.blocks[k];
      const int off = offsets_[id];
      Eigen::MatrixXd fd(r0.size(), blocks_[id].dim);
      for (int c = 0; c < blocks_[id].dim; ++c) {
        const double h = step * std::max(1.0, std::abs(theta[off + c]));
        work[off + c] = theta[off + c] + h;
        evaluate_block(i, work, rp, nullptr);
        work[off + c] = theta[off + c] - h;
        evaluate_block(i, work, rm, nullptr);
        work[off + c] = theta[off + c];
        fd.col(c) = (rp - rm) / (2.0 * h);
      }
      const double scale = std::max(1.0, jacs[k].cwiseAbs().maxCoeff());
      err = std::max(err, (jacs[k] - fd).cwiseAbs().maxCoeff() / scale);
    }
    report.entries.push_back({i, err});
    report.max_rel_error = std::max(report.max_rel_error, err);
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace rnls
