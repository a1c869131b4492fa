#pragma once

#include <Eigen/Core>
#include <map>
#include <vector>

#include "rnls/errors.h"
#include "rnls/problem.h"

namespace rnls {

// Symmetric block-sparse system (H + lambda I) x = g with H = J^T W J and
// g = J^T W r. Only the upper block triangle is stored; the damping term is
// kept separate so retries with a different lambda reuse the assembly.
class BlockSparseSystem {
 public:
  explicit BlockSparseSystem(std::vector<int> block_dims);

  int num_blocks() const { return static_cast<int>(dims_.size()); }
  int dimension() const { return total_dim_; }
  int block_dim(int b) const { return dims_[b]; }
  int block_offset(int b) const { return offsets_[b]; }

  // Accumulates m into H at block (row, col); (row > col) contributions are
  // transposed into the stored upper triangle.
  void add_block(int row, int col, const Eigen::MatrixXd& m);
  void add_rhs(int block, const Eigen::VectorXd& v);

  const Eigen::VectorXd& rhs() const { return rhs_; }
  Eigen::VectorXd& rhs() { return rhs_; }

  void set_damping(double lambda);
  double damping() const { return lambda_; }

  // y = (H + lambda I) x
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
  // Dense H + lambda I (small systems and tests).
  Eigen::MatrixXd dense() const;

  const Eigen::MatrixXd* find_block(int row, int col) const;

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int total_dim_ = 0;
  double lambda_ = 0.0;
  // rows_[r] maps col -> block, col >= r.
  std::vector<std::map<int, Eigen::MatrixXd>> rows_;
  Eigen::VectorXd rhs_;
};

// Gauss-Newton assembly of the weighted normal equations
// H = sum_i w_i J_i^T J_i (+ lambda I), g = sum_i w_i J_i^T r_i.
BlockSparseSystem assemble(const Problem& problem, const Eigen::VectorXd& theta,
                           const Eigen::VectorXd& weights, double lambda);

struct PcgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  bool jacobi_fallback = false;  // some preconditioner block was singular
  double residual_norm = 0.0;
};

// Preconditioned conjugate gradient with the block-diagonal of H + lambda I
// inverted blockwise as preconditioner. Terminates when
// ||Hx - g|| <= forcing * ||g||.
PcgResult pcg_solve(const BlockSparseSystem& system, int max_iter = 1000,
                    double forcing = 0.1);

// Dense factorization solve; throws SingularSystemError when the damped
// matrix is numerically singular.
Eigen::VectorXd direct_solve(const BlockSparseSystem& system);

// Dispatch: direct solve up to `dense_threshold` total dimension, PCG above.
Eigen::VectorXd solve_system(const BlockSparseSystem& system, int dense_threshold,
                             int pcg_max_iter = 1000, double forcing = 0.1);

}  // namespace rnls
