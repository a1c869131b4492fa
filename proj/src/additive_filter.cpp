#include "rnls/additive_filter.h"

#include <cmath>
#include <numbers>

#include "rnls/ba.h"
#include "rnls/linear_solvers.h"
#include "filter_method_loop.h"

namespace rnls {

namespace {

// r_hat(p) = p; with weight mu_f omega(||p||) this contributes the
// Gauss-Newton structure of f to the cooperative system.
class ReplicaResidual : public ResidualFunction {
 public:
  explicit ReplicaResidual(int dim) : dim_(dim) {}
  int dimension() const override { return dim_; }
  bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    residual = params[0];
    if (jacobians) (*jacobians)[0] = Eigen::MatrixXd::Identity(dim_, dim_);
    return true;
  }

 private:
  int dim_;
};

// c_i = p_i - r_i(theta); attaches the base blocks plus the replica (last).
class ConsistencyResidual : public ResidualFunction {
 public:
  explicit ConsistencyResidual(std::shared_ptr<const ResidualFunction> base)
      : base_(std::move(base)) {}
  int dimension() const override { return base_->dimension(); }
  bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    const size_t nb = params.size() - 1;
    std::vector<Eigen::Ref<const Eigen::VectorXd>> base_params(params.begin(),
                                                               params.begin() + nb);
    std::vector<Eigen::MatrixXd> base_jacs;
    if (jacobians) base_jacs.resize(nb);
    if (!base_->evaluate(base_params, residual, jacobians ? &base_jacs : nullptr))
      return false;
    residual = params[nb] - residual;
    if (jacobians) {
      for (size_t k = 0; k < nb; ++k) (*jacobians)[k] = -base_jacs[k];
      (*jacobians)[nb] =
          Eigen::MatrixXd::Identity(base_->dimension(), base_->dimension());
    }
    return true;
  }

 private:
  std::shared_ptr<const ResidualFunction> base_;
};

}  // namespace

AdditiveProblem::AdditiveProblem(const Problem& problem, double mu_f,
                                 const LMConfig& lm)
    : base_(&problem), aug_(problem.kernel()), mu_f_(mu_f), lm_(lm) {
  if (!(mu_f > 0.0) || !(mu_f < 1.0))
    throw std::invalid_argument("addfilter: mu_f must be in (0, 1)");
  problem.validate();
  theta_dim_ = problem.dimension();
  n_ = problem.num_residuals();

  for (int b = 0; b < problem.num_blocks(); ++b)
    aug_.add_block(problem.block(b).values);
  std::vector<int> p_block(n_);
  for (int i = 0; i < n_; ++i) {
    const int dim = problem.residual(i).fn->dimension();
    p_block[i] = aug_.add_block(Eigen::VectorXd::Zero(dim));
    p_offset_.push_back(aug_.block_offset(p_block[i]));
    p_dim_.push_back(dim);
  }
  for (int i = 0; i < n_; ++i)
    aug_.add_residual(std::make_shared<ReplicaResidual>(p_dim_[i]), {p_block[i]});
  for (int i = 0; i < n_; ++i) {
    std::vector<int> attached = problem.residual(i).blocks;
    attached.push_back(p_block[i]);
    aug_.add_residual(std::make_shared<ConsistencyResidual>(problem.residual(i).fn),
                      attached);
  }
}

int AdditiveProblem::joint_dim() const { return aug_.dimension(); }

Eigen::VectorXd AdditiveProblem::make_state(const Eigen::VectorXd& theta0) const {
  if (theta0.size() != theta_dim_)
    throw std::invalid_argument("addfilter: theta dimension mismatch");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(joint_dim());
  x.head(theta_dim_) = theta0;
  Eigen::VectorXd r;
  for (int i = 0; i < n_; ++i) {
    base_->evaluate_block(i, theta0, r, nullptr);
    x.segment(p_offset_[i], p_dim_[i]) = r;
  }
  return x;
}

FilterPair AdditiveProblem::eval_fh(const Eigen::VectorXd& x) const {
  FilterPair out{0.0, 0.0};
  for (int i = 0; i < n_; ++i)
    out.f += psi(aug_.kernel(), x.segment(p_offset_[i], p_dim_[i]).norm());
  Eigen::VectorXd c;
  for (int i = 0; i < n_; ++i) {
    aug_.evaluate_block(n_ + i, x, c, nullptr);
    out.h += c.squaredNorm();
  }
  return out;
}

void AdditiveProblem::gradients(const Eigen::VectorXd& x, Eigen::VectorXd* g_f,
                                Eigen::VectorXd* g_h) const {
  if (g_f) {
    *g_f = Eigen::VectorXd::Zero(joint_dim());
    for (int i = 0; i < n_; ++i) {
      const auto p = x.segment(p_offset_[i], p_dim_[i]);
      g_f->segment(p_offset_[i], p_dim_[i]) = omega(aug_.kernel(), p.norm()) * p;
    }
  }
  if (!g_h) return;
  *g_h = Eigen::VectorXd::Zero(joint_dim());
  Eigen::VectorXd c;
  std::vector<Eigen::MatrixXd> jacs;
  for (int i = 0; i < n_; ++i) {
    aug_.evaluate_block(n_ + i, x, c, &jacs);
    const auto& attached = aug_.residual(n_ + i).blocks;
    for (size_t k = 0; k < attached.size(); ++k) {
      const int id = attached[k];
      g_h->segment(aug_.block_offset(id), aug_.block_dim(id)).noalias() +=
          2.0 * jacs[k].transpose() * c;
    }
  }
}

Eigen::VectorXd AdditiveProblem::cooperative_step(const Eigen::VectorXd& x,
                                                  double lambda) const {
  Eigen::VectorXd weights(2 * n_);
  for (int i = 0; i < n_; ++i)
    weights[i] =
        mu_f_ * omega(aug_.kernel(), x.segment(p_offset_[i], p_dim_[i]).norm());
  weights.tail(n_).setConstant(2.0 * mu_h());
  BlockSparseSystem system = assemble(aug_, x, weights, lambda);
  const Eigen::VectorXd delta =
      solve_system(system, lm_.dense_threshold, lm_.pcg_max_iter, lm_.pcg_forcing);
  return x - delta;
}

Eigen::VectorXd AdditiveProblem::restoration_step(const Eigen::VectorXd& x,
                                                  int grid_points,
                                                  double snap_tol) const {
  if (grid_points < 2)
    throw std::invalid_argument("addfilter: restoration grid needs >= 2 points");
  // Direction p_i -> r_i(theta), i.e. p - gamma c with c = p - r(theta).
  Eigen::VectorXd c_all = Eigen::VectorXd::Zero(joint_dim());
  Eigen::VectorXd c;
  double cnorm2 = 0.0;
  for (int i = 0; i < n_; ++i) {
    aug_.evaluate_block(n_ + i, x, c, nullptr);
    c_all.segment(p_offset_[i], p_dim_[i]) = c;
    cnorm2 += c.squaredNorm();
  }
  if (cnorm2 == 0.0) return x;
  // Numerically feasible: snap the replicas onto the residuals so the
  // zero-margin endgame cannot wedge the damping upward forever.
  if (cnorm2 < snap_tol) return x - c_all;

  Eigen::VectorXd best = x;
  double best_angle = std::numeric_limits<double>::infinity();
  Eigen::VectorXd candidate = x, g_f, g_h;
  // gamma = 0 reproduces the rejected iterate and is skipped so the
  // restoration always makes feasibility progress.
  for (int k = 1; k < grid_points; ++k) {
    const double gamma = 0.5 * k / (grid_points - 1);
    candidate = x - gamma * c_all;
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

class AdditiveStepper : public detail::FilterStepper {
 public:
  AdditiveStepper(const AdditiveProblem& ap, const AddFilterOptions& opt)
      : ap_(ap), opt_(opt) {}

  FilterPair eval_fh(const Eigen::VectorXd& x) const override {
    return ap_.eval_fh(x);
  }
  Eigen::VectorXd cooperative(const Eigen::VectorXd& x, double lambda) const override {
    return ap_.cooperative_step(x, lambda);
  }
  Eigen::VectorXd restoration(const Eigen::VectorXd& x) const override {
    return ap_.restoration_step(x, opt_.restoration_grid, opt_.h_feasible_tol);
  }
  Eigen::VectorXd stationarity_gradient(const Eigen::VectorXd& x) const override {
    // The joint gradient cannot vanish at a constrained optimum (g_f pulls
    // the replicas toward zero even at feasibility); the reduced gradient of
    // psi over theta is the meaningful stationarity measure.
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    g.head(ap_.theta_dim()) =
        ap_.base().robust_gradient(x.head(ap_.theta_dim()));
    return g;
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
  const AdditiveProblem& ap_;
  const AddFilterOptions& opt_;
};

}  // namespace

SolverTrace addfilter_solve(const Problem& problem, const Eigen::VectorXd& theta0,
                            const AddFilterOptions& options) {
  AdditiveProblem ap(problem, options.mu_f, options.base.lm);
  AdditiveStepper stepper(ap, options);
  detail::FilterLoopOptions lo;
  lo.base = options.base;
  lo.alpha = options.alpha;
  lo.h_feasible_tol = options.h_feasible_tol;

  SolverTrace trace =
      detail::filter_method_solve(stepper, ap.make_state(theta0), lo);
  trace.final_theta = trace.final_state.head(ap.theta_dim());
  trace.final_psi = problem.evaluate_objective(trace.final_theta).value;
  return trace;
}

}  // namespace rnls
