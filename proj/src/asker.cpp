#include "rnls/asker.h"

#include <cmath>
#include <numbers>

#include "rnls/ba.h"
#include "rnls/linear_solvers.h"
#include "filter_method_loop.h"

namespace rnls {

namespace {

// Base residual divided by sigma = 1 + s^2; attaches the base blocks plus the
// scalar s block (last).
class ScaledResidual : public ResidualFunction {
 public:
  explicit ScaledResidual(std::shared_ptr<const ResidualFunction> base)
      : base_(std::move(base)) {}
  int dimension() const override { return base_->dimension(); }
  bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    const size_t nb = params.size() - 1;
    const double s = params[nb][0];
    const double sigma = 1.0 + s * s;
    std::vector<Eigen::Ref<const Eigen::VectorXd>> base_params(params.begin(),
                                                               params.begin() + nb);
    std::vector<Eigen::MatrixXd> base_jacs;
    if (jacobians) base_jacs.resize(nb);
    if (!base_->evaluate(base_params, residual, jacobians ? &base_jacs : nullptr))
      return false;
    if (jacobians) {
      for (size_t k = 0; k < nb; ++k) (*jacobians)[k] = base_jacs[k] / sigma;
      (*jacobians)[nb] = -2.0 * s / (sigma * sigma) * residual;
    }
    residual /= sigma;
    return true;
  }

 private:
  std::shared_ptr<const ResidualFunction> base_;
};

// Scalar residual s; with weight 2 mu_h it contributes mu_h H_h and mu_h g_h
// (H_h = 2 I on the s block, g_h = 2 s) to the assembled cooperative system.
class ScalePenalty : public ResidualFunction {
 public:
  int dimension() const override { return 1; }
  bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    residual[0] = params[0][0];
    if (jacobians) (*jacobians)[0] = Eigen::MatrixXd::Ones(1, 1);
    return true;
  }
};

}  // namespace

AskerProblem::AskerProblem(const Problem& problem, double mu_f, const LMConfig& lm)
    : base_(&problem), aug_(problem.kernel()), mu_f_(mu_f), lm_(lm) {
  if (!(mu_f > 0.0) || !(mu_f < 1.0))
    throw std::invalid_argument("asker: mu_f must be in (0, 1)");
  problem.validate();
  theta_dim_ = problem.dimension();
  n_ = problem.num_residuals();

  for (int b = 0; b < problem.num_blocks(); ++b)
    aug_.add_block(problem.block(b).values);
  const Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
  std::vector<int> s_block(n_);
  for (int i = 0; i < n_; ++i) s_block[i] = aug_.add_block(zero1);
  for (int i = 0; i < n_; ++i) {
    std::vector<int> attached = problem.residual(i).blocks;
    attached.push_back(s_block[i]);
    aug_.add_residual(std::make_shared<ScaledResidual>(problem.residual(i).fn),
                      attached);
  }
  auto penalty = std::make_shared<ScalePenalty>();
  for (int i = 0; i < n_; ++i) aug_.add_residual(penalty, {s_block[i]});
}

Eigen::VectorXd AskerProblem::make_state(const Eigen::VectorXd& theta0,
                                         double s_init) const {
  if (theta0.size() != theta_dim_)
    throw std::invalid_argument("asker: theta dimension mismatch");
  Eigen::VectorXd x(joint_dim());
  x.head(theta_dim_) = theta0;
  x.tail(n_).setConstant(s_init);
  return x;
}

FilterPair AskerProblem::eval_fh(const Eigen::VectorXd& x) const {
  FilterPair out{0.0, x.tail(n_).squaredNorm()};
  Eigen::VectorXd r;
  for (int i = 0; i < n_; ++i) {
    aug_.evaluate_block(i, x, r, nullptr);
    out.f += psi(aug_.kernel(), r.norm());
  }
  return out;
}

void AskerProblem::gradients(const Eigen::VectorXd& x, Eigen::VectorXd* g_f,
                             Eigen::VectorXd* g_h) const {
  if (g_h) {
    *g_h = Eigen::VectorXd::Zero(joint_dim());
    g_h->tail(n_) = 2.0 * x.tail(n_);
  }
  if (!g_f) return;
  *g_f = Eigen::VectorXd::Zero(joint_dim());
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> jacs;
  for (int i = 0; i < n_; ++i) {
    aug_.evaluate_block(i, x, r, &jacs);
    const double w = omega(aug_.kernel(), r.norm());
    if (w == 0.0) continue;
    const auto& attached = aug_.residual(i).blocks;
    for (size_t k = 0; k < attached.size(); ++k) {
      const int id = attached[k];
      g_f->segment(aug_.block_offset(id), aug_.block_dim(id)).noalias() +=
          w * jacs[k].transpose() * r;
    }
  }
}

Eigen::VectorXd AskerProblem::cooperative_step(const Eigen::VectorXd& x,
                                               double lambda, double sigma_trust,
                                               double sigma_growth) const {
  Eigen::VectorXd weights(2 * n_);
  Eigen::VectorXd r;
  for (int i = 0; i < n_; ++i) {
    aug_.evaluate_block(i, x, r, nullptr);
    weights[i] = mu_f_ * omega(aug_.kernel(), r.norm());
  }
  weights.tail(n_).setConstant(2.0 * mu_h());
  BlockSparseSystem system = assemble(aug_, x, weights, lambda);
  Eigen::VectorXd delta =
      solve_system(system, lm_.dense_threshold, lm_.pcg_max_iter, lm_.pcg_forcing);

  bool capped = false;
  if (sigma_trust > 0.0 && sigma_trust < 1.0) {
    for (int i = 0; i < n_; ++i) {
      const double s_old = x[theta_dim_ + i];
      const double sigma_old = 1.0 + s_old * s_old;
      double s_new = s_old - delta[theta_dim_ + i];
      const double sigma_new = 1.0 + s_new * s_new;
      const double lo = sigma_trust * sigma_old;
      const double hi = sigma_growth * sigma_old;
      if (sigma_new < lo) {
        s_new = std::copysign(std::sqrt(lo - 1.0), s_old);
      } else if (sigma_new > hi) {
        s_new = std::copysign(std::sqrt(hi - 1.0), s_new != 0.0 ? s_new : s_old);
      } else {
        continue;
      }
      delta[theta_dim_ + i] = s_old - s_new;
      capped = true;
    }
  }
  if (capped) {
    // Re-solve the theta block with the clamped s-step substituted into the
    // linearized scaled residuals r + J_theta d_theta - J_s ds.
    std::vector<int> dims(base_->num_blocks());
    for (int b = 0; b < base_->num_blocks(); ++b) dims[b] = base_->block_dim(b);
    BlockSparseSystem reduced(std::move(dims));
    reduced.set_damping(lambda);
    std::vector<Eigen::MatrixXd> jacs;
    for (int i = 0; i < n_; ++i) {
      if (weights[i] == 0.0) continue;
      aug_.evaluate_block(i, x, r, &jacs);
      const auto& attached = aug_.residual(i).blocks;
      const size_t nb = attached.size() - 1;  // last block is s_i
      const Eigen::VectorXd r_mod = r - jacs[nb] * delta[theta_dim_ + i];
      for (size_t a = 0; a < nb; ++a) {
        reduced.add_rhs(attached[a], weights[i] * jacs[a].transpose() * r_mod);
        for (size_t b = a; b < nb; ++b)
          reduced.add_block(attached[a], attached[b],
                            weights[i] * jacs[a].transpose() * jacs[b]);
      }
    }
    delta.head(theta_dim_) = solve_system(reduced, lm_.dense_threshold,
                                          lm_.pcg_max_iter, lm_.pcg_forcing);
  }
  return x - delta;
}

Eigen::VectorXd AskerProblem::restoration_step(const Eigen::VectorXd& x,
                                               int grid_points,
                                               double snap_below) const {
  if (grid_points < 2)
    throw std::invalid_argument("asker: restoration grid needs >= 2 points");
  const Eigen::VectorXd s = x.tail(n_);
  if (s.squaredNorm() == 0.0) return x;  // feasible points are fixed points
  if (s.cwiseAbs2().maxCoeff() <= snap_below) {
    Eigen::VectorXd snapped = x;
    snapped.tail(n_).setZero();
    return snapped;
  }

  Eigen::VectorXd best = x;
  double best_angle = std::numeric_limits<double>::infinity();
  Eigen::VectorXd candidate = x, g_f, g_h;
  // gamma = 0 reproduces the rejected iterate and is skipped so the
  // restoration always makes feasibility progress.
  for (int k = 1; k < grid_points; ++k) {
    const double gamma = 0.5 * k / (grid_points - 1);
    candidate.tail(n_) = (1.0 - gamma) * s;
    gradients(candidate, &g_f, &g_h);
    const double nf = g_f.norm(), nh = g_h.norm();
    const double angle =
        (nf == 0.0 || nh == 0.0)
            ? std::numbers::pi
            : std::acos(std::clamp(g_f.dot(g_h) / (nf * nh), -1.0, 1.0));
    if (angle < best_angle) {
      best_angle = angle;
      best = candidate;
    }
  }
  return best;
}

namespace {

class AskerStepper : public detail::FilterStepper {
 public:
  AskerStepper(const AskerProblem& ap, const AskerOptions& opt)
      : ap_(ap), opt_(opt) {}

  FilterPair eval_fh(const Eigen::VectorXd& x) const override {
    return ap_.eval_fh(x);
  }
  Eigen::VectorXd cooperative(const Eigen::VectorXd& x, double lambda) const override {
    return ap_.cooperative_step(x, lambda, opt_.sigma_trust, opt_.sigma_growth);
  }
  Eigen::VectorXd restoration(const Eigen::VectorXd& x) const override {
    return ap_.restoration_step(x, opt_.restoration_grid, opt_.scale_snap);
  }
  Eigen::VectorXd stationarity_gradient(const Eigen::VectorXd& x) const override {
    // Vanishes at feasible stationary points: the constraint gradient 2s is
    // zero at s = 0 and g_f reduces to the robust-objective gradient there.
    Eigen::VectorXd g_f, g_h;
    ap_.gradients(x, &g_f, &g_h);
    return ap_.mu_f() * g_f + ap_.mu_h() * g_h;
  }
  double psi_unscaled(const Eigen::VectorXd& x) const override {
    return ap_.base().evaluate_objective(x.head(ap_.theta_dim())).value;
  }
  double inlier(const Eigen::VectorXd& x, double threshold) const override {
    return inlier_rate(ap_.base(), x.head(ap_.theta_dim()), threshold);
  }
  void normalize(Eigen::VectorXd& x) const override {
    Eigen::VectorXd theta = x.head(ap_.theta_dim());
    ap_.base().normalize_state(theta);
    x.head(ap_.theta_dim()) = theta;
  }

 private:
  const AskerProblem& ap_;
  const AskerOptions& opt_;
};

}  // namespace

SolverTrace asker_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                        const AskerOptions& options) {
  AskerProblem ap(problem, options.mu_f, options.base.lm);
  AskerStepper stepper(ap, options);
  detail::FilterLoopOptions lo;
  lo.base = options.base;
  lo.alpha = options.alpha;
  lo.h_feasible_tol = options.h_feasible_tol;

  SolverTrace trace = detail::filter_method_solve(
      stepper, ap.make_state(theta0, options.s_init), lo);
  trace.final_theta = trace.final_state.head(ap.theta_dim());
  trace.final_psi = problem.evaluate_objective(trace.final_theta).value;
  return trace;
}

}  // namespace rnls
