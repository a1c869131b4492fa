#include "rnls/linear_solvers.h"

#include <Eigen/Dense>
#include <cmath>

namespace rnls {

BlockSparseSystem::BlockSparseSystem(std::vector<int> block_dims)
    : dims_(std::move(block_dims)) {
  offsets_.reserve(dims_.size());
  for (int d : dims_) {
    if (d <= 0) throw std::invalid_argument("BlockSparseSystem: block dim must be > 0");
    offsets_.push_back(total_dim_);
    total_dim_ += d;
  }
  rows_.resize(dims_.size());
  rhs_ = Eigen::VectorXd::Zero(total_dim_);
}

void BlockSparseSystem::add_block(int row, int col, const Eigen::MatrixXd& m) {
  if (row > col) {
    add_block(col, row, m.transpose());
    return;
  }
  if (m.rows() != dims_[row] || m.cols() != dims_[col])
    throw std::invalid_argument("add_block: dimension mismatch");
  auto [it, inserted] = rows_[row].try_emplace(col, m);
  if (!inserted) it->second += m;
}

void BlockSparseSystem::add_rhs(int block, const Eigen::VectorXd& v) {
  if (v.size() != dims_[block])
    throw std::invalid_argument("add_rhs: dimension mismatch");
  rhs_.segment(offsets_[block], dims_[block]) += v;
}

void BlockSparseSystem::set_damping(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("set_damping: lambda must be >= 0");
  lambda_ = lambda;
}

Eigen::VectorXd BlockSparseSystem::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = lambda_ * x;
  for (int r = 0; r < num_blocks(); ++r) {
    for (const auto& [c, m] : rows_[r]) {
      y.segment(offsets_[r], dims_[r]).noalias() += m * x.segment(offsets_[c], dims_[c]);
      if (c != r)
        y.segment(offsets_[c], dims_[c]).noalias() +=
            m.transpose() * x.segment(offsets_[r], dims_[r]);
    }
  }
  return y;
}

Eigen::MatrixXd BlockSparseSystem::dense() const {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(total_dim_, total_dim_);
  for (int r = 0; r < num_blocks(); ++r) {
    for (const auto& [c, m] : rows_[r]) {
      H.block(offsets_[r], offsets_[c], dims_[r], dims_[c]) = m;
      if (c != r)
        H.block(offsets_[c], offsets_[r], dims_[c], dims_[r]) = m.transpose();
    }
  }
  H.diagonal().array() += lambda_;
  return H;
}

const Eigen::MatrixXd* BlockSparseSystem::find_block(int row, int col) const {
  if (row > col) std::swap(row, col);
  auto it = rows_[row].find(col);
  return it == rows_[row].end() ? nullptr : &it->second;
}

BlockSparseSystem assemble(const Problem& problem, const Eigen::VectorXd& theta,
                           const Eigen::VectorXd& weights, double lambda) {
  if (theta.size() != problem.dimension())
    throw std::invalid_argument("assemble: state dimension mismatch");
  if (weights.size() != problem.num_residuals())
    throw std::invalid_argument("assemble: weight count mismatch");
  if (!weights.allFinite() || (weights.array() < 0.0).any())
    throw std::invalid_argument("assemble: weights must be finite and >= 0");

  std::vector<int> dims(problem.num_blocks());
  for (int b = 0; b < problem.num_blocks(); ++b) dims[b] = problem.block_dim(b);
  BlockSparseSystem system(std::move(dims));
  system.set_damping(lambda);

  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> jacs;
  for (int i = 0; i < problem.num_residuals(); ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    problem.evaluate_block(i, theta, r, &jacs);
    const auto& attached = problem.residual(i).blocks;
    for (size_t a = 0; a < attached.size(); ++a) {
      system.add_rhs(attached[a], w * jacs[a].transpose() * r);
      for (size_t b = a; b < attached.size(); ++b)
        system.add_block(attached[a], attached[b], w * jacs[a].transpose() * jacs[b]);
    }
  }
  return system;
}

namespace {

// Block-diagonal preconditioner; singular blocks fall back to scalar Jacobi.
class BlockDiagPreconditioner {
 public:
  explicit BlockDiagPreconditioner(const BlockSparseSystem& s) : system_(s) {
    const double lambda = s.damping();
    factors_.reserve(s.num_blocks());
    jacobi_.resize(s.dimension());
    for (int b = 0; b < s.num_blocks(); ++b) {
      Eigen::MatrixXd D = Eigen::MatrixXd::Zero(s.block_dim(b), s.block_dim(b));
      if (const Eigen::MatrixXd* m = s.find_block(b, b)) D = *m;
      D.diagonal().array() += lambda;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(D);
      const bool ok = ldlt.info() == Eigen::Success &&
                      ldlt.vectorD().minCoeff() > 0.0 &&
                      ldlt.vectorD().allFinite();
      if (!ok) {
        fallback_ = true;
        for (int i = 0; i < s.block_dim(b); ++i)
          jacobi_[s.block_offset(b) + i] = 1.0 / std::max(D(i, i), 1e-300);
        factors_.emplace_back();  // empty marker
      } else {
        factors_.push_back(std::move(ldlt));
      }
    }
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& r) const {
    Eigen::VectorXd z(r.size());
    for (int b = 0; b < system_.num_blocks(); ++b) {
      const int off = system_.block_offset(b);
      const int dim = system_.block_dim(b);
      if (factors_[b].rows() == 0)
        z.segment(off, dim) =
            jacobi_.segment(off, dim).cwiseProduct(r.segment(off, dim));
      else
        z.segment(off, dim) = factors_[b].solve(r.segment(off, dim));
    }
    return z;
  }

  bool used_fallback() const { return fallback_; }

 private:
  const BlockSparseSystem& system_;
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> factors_;
  Eigen::VectorXd jacobi_;
  bool fallback_ = false;
};

}  // namespace

PcgResult pcg_solve(const BlockSparseSystem& system, int max_iter, double forcing) {
  PcgResult out;
  const Eigen::VectorXd& g = system.rhs();
  out.x = Eigen::VectorXd::Zero(system.dimension());
  const double gnorm = g.norm();
  if (gnorm == 0.0) {
    out.converged = true;
    return out;
  }
  BlockDiagPreconditioner precond(system);
  out.jacobi_fallback = precond.used_fallback();

  Eigen::VectorXd r = g;
  Eigen::VectorXd z = precond.apply(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  const double target = forcing * gnorm;
  out.residual_norm = r.norm();

  for (int k = 1; k <= max_iter; ++k) {
    const Eigen::VectorXd Hp = system.multiply(p);
    const double pHp = p.dot(Hp);
    if (!(pHp > 0.0)) break;  // lost positive definiteness
    const double alpha = rz / pHp;
    out.x += alpha * p;
    r -= alpha * Hp;
    out.iterations = k;
    out.residual_norm = r.norm();
    if (out.residual_norm <= target) {
      out.converged = true;
      return out;
    }
    z = precond.apply(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return out;
}

Eigen::VectorXd direct_solve(const BlockSparseSystem& system) {
  const Eigen::MatrixXd H = system.dense();
  const Eigen::VectorXd& g = system.rhs();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success)
    throw SingularSystemError("direct_solve: factorization failed");
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(dmax > 0.0) || d.minCoeff() <= 1e-14 * dmax)
    throw SingularSystemError("direct_solve: matrix is numerically singular");
  Eigen::VectorXd x = ldlt.solve(g);
  const double scale = std::max(g.norm(), H.cwiseAbs().maxCoeff() * x.norm());
  if (!x.allFinite() || (H * x - g).norm() > 1e-8 * std::max(1.0, scale))
    throw SingularSystemError("direct_solve: solution check failed");
  return x;
}

Eigen::VectorXd solve_system(const BlockSparseSystem& system, int dense_threshold,
                             int pcg_max_iter, double forcing) {
  if (system.dimension() <= dense_threshold) return direct_solve(system);
  return pcg_solve(system, pcg_max_iter, forcing).x;
}

}  // namespace rnls
