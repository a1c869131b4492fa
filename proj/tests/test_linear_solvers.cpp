#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "rnls/ba.h"
#include "rnls/linear_solvers.h"

using namespace rnls;

namespace {

std::shared_ptr<FunctionResidual> linear_residual_1d(double slope) {
  return std::make_shared<FunctionResidual>(
      1, [slope](const auto& params, Eigen::VectorXd& r,
                 std::vector<Eigen::MatrixXd>* J) {
        r[0] = slope * params[0][0];
        if (J) (*J)[0] = Eigen::MatrixXd::Constant(1, 1, slope);
        return true;
      });
}

// Random block-sparse SPD system through the real assembly path: random
// linear residual blocks over random parameter blocks, plus damping.
BlockSparseSystem random_system(std::mt19937& rng, int max_dim) {
  std::uniform_int_distribution<int> dim_dist(1, 6);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  Problem p;
  int total = 0;
  while (total < max_dim - 6) {
    const int d = dim_dist(rng);
    p.add_block(Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return val(rng); }));
    total += d;
  }
  const int nb = p.num_blocks();
  std::uniform_int_distribution<int> block_pick(0, nb - 1);
  const int n_res = 3 * nb;
  for (int i = 0; i < n_res; ++i) {
    std::vector<int> attached{block_pick(rng)};
    if (val(rng) > 0.0) {
      int other = block_pick(rng);
      if (other != attached[0]) attached.push_back(other);
    }
    int cols = 0;
    for (int id : attached) cols += p.block_dim(id);
    const int rows = dim_dist(rng);
    Eigen::MatrixXd A =
        Eigen::MatrixXd::NullaryExpr(rows, cols, [&](Eigen::Index, Eigen::Index) {
          return val(rng);
        });
    Eigen::VectorXd b =
        Eigen::VectorXd::NullaryExpr(rows, [&](Eigen::Index) { return val(rng); });
    std::vector<int> dims;
    for (int id : attached) dims.push_back(p.block_dim(id));
    p.add_residual(std::make_shared<FunctionResidual>(
                       rows,
                       [A, b, dims](const auto& params, Eigen::VectorXd& r,
                                    std::vector<Eigen::MatrixXd>* J) {
                         Eigen::VectorXd x(A.cols());
                         int off = 0;
                         for (size_t k = 0; k < params.size(); ++k) {
                           x.segment(off, dims[k]) = params[k];
                           off += dims[k];
                         }
                         r = A * x - b;
                         if (J) {
                           int c = 0;
                           for (size_t k = 0; k < dims.size(); ++k) {
                             (*J)[k] = A.middleCols(c, dims[k]);
                             c += dims[k];
                           }
                         }
                         return true;
                       }),
                   attached);
  }
  std::uniform_real_distribution<double> wdist(0.1, 2.0);
  Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(
      p.num_residuals(), [&](Eigen::Index) { return wdist(rng); });
  return assemble(p, p.initial_state(), w, 1e-3 * (1.0 + val(rng) + 1.0));
}

}  // namespace

TEST_CASE("assembly golden examples") {
  SUBCASE("identity jacobian") {
    Problem p;
    p.add_block(Eigen::VectorXd::Constant(1, 3.0));
    p.add_residual(linear_residual_1d(1.0), {0});
    BlockSparseSystem s = assemble(p, p.initial_state(), Eigen::VectorXd::Ones(1), 0.0);
    CHECK(s.dense()(0, 0) == doctest::Approx(1.0));
    CHECK(s.rhs()[0] == doctest::Approx(3.0));
  }
  SUBCASE("two residuals with damping") {
    Problem p;
    p.add_block(Eigen::VectorXd::Constant(1, 2.0));
    p.add_residual(linear_residual_1d(1.0), {0});
    p.add_residual(linear_residual_1d(2.0), {0});
    BlockSparseSystem s = assemble(p, p.initial_state(), Eigen::VectorXd::Ones(2), 1.0);
    CHECK(s.dense()(0, 0) == doctest::Approx(6.0));       // 1 + 4 + 1
    CHECK(s.rhs()[0] == doctest::Approx(5.0 * 2.0));      // (1 + 4) theta
  }
  SUBCASE("zero weights leave damping only") {
    Problem p;
    p.add_block(Eigen::Vector2d(1.0, 1.0));
    p.add_residual(std::make_shared<FunctionResidual>(
                       2,
                       [](const auto& params, Eigen::VectorXd& r,
                          std::vector<Eigen::MatrixXd>* J) {
                         r = params[0];
                         if (J) (*J)[0] = Eigen::MatrixXd::Identity(2, 2);
                         return true;
                       }),
                   {0});
    BlockSparseSystem s = assemble(p, p.initial_state(), Eigen::VectorXd::Zero(1), 2.0);
    CHECK(s.dense().isApprox(2.0 * Eigen::MatrixXd::Identity(2, 2)));
    CHECK(s.rhs().norm() == 0.0);
  }
  SUBCASE("touching weights reproduce the IRLS normal equations") {
    RobustMean1D spec;
    spec.data = Eigen::VectorXd::Zero(3);
    spec.data << 0.0, 0.5, 10.0;
    spec.kernel = smooth_truncated_kernel(1.0);
    Problem p = make_robust_mean_problem(spec, 0.2);
    const Eigen::VectorXd theta = p.initial_state();
    const Objective obj = p.evaluate_objective(theta);
    const Eigen::VectorXd u = omega(p.kernel(), obj.norms);
    BlockSparseSystem s = assemble(p, theta, u, 0.0);
    // Hand-assembled: H = sum w_i, g = sum w_i (theta - d_i).
    double H = 0.0, g = 0.0;
    for (int i = 0; i < 3; ++i) {
      H += u[i];
      g += u[i] * (0.2 - spec.data[i]);
    }
    CHECK(s.dense()(0, 0) == doctest::Approx(H));
    CHECK(s.rhs()[0] == doctest::Approx(g));
  }
}

TEST_CASE("direct solve") {
  SUBCASE("diagonal system") {
    BlockSparseSystem s({2});
    s.add_block(0, 0, 2.0 * Eigen::MatrixXd::Identity(2, 2));
    s.add_rhs(0, Eigen::Vector2d(2.0, 4.0));
    const Eigen::VectorXd x = direct_solve(s);
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(2.0));
  }
  SUBCASE("scalar system") {
    BlockSparseSystem s({1});
    s.add_block(0, 0, Eigen::MatrixXd::Constant(1, 1, 6.0));
    s.add_rhs(0, Eigen::VectorXd::Constant(1, 12.0));
    CHECK(direct_solve(s)[0] == doctest::Approx(2.0));
  }
  SUBCASE("singular matrix throws") {
    BlockSparseSystem s({2});
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 0.0, 0.0, 0.0;
    s.add_block(0, 0, m);
    s.add_rhs(0, Eigen::Vector2d(1.0, 1.0));
    CHECK_THROWS_AS(direct_solve(s), SingularSystemError);
  }
}

TEST_CASE("pcg solve") {
  SUBCASE("identity solves in one iteration") {
    BlockSparseSystem s({3});
    s.add_block(0, 0, Eigen::MatrixXd::Identity(3, 3));
    s.add_rhs(0, Eigen::Vector3d(1.0, -2.0, 0.5));
    const PcgResult r = pcg_solve(s);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK((r.x - s.rhs()).norm() < 1e-12);
  }
  SUBCASE("zero rhs returns zero in zero iterations") {
    BlockSparseSystem s({3});
    s.add_block(0, 0, Eigen::MatrixXd::Identity(3, 3));
    const PcgResult r = pcg_solve(s);
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(r.x.norm() == 0.0);
  }
  SUBCASE("random block systems match the dense solve") {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 10; ++trial) {
      BlockSparseSystem s = random_system(rng, 60);
      const Eigen::VectorXd xd = direct_solve(s);
      const PcgResult r = pcg_solve(s, 1000, 1e-9);
      CHECK(r.converged);
      CHECK((r.x - xd).norm() <= 1e-6 * std::max(1.0, xd.norm()));
    }
  }
  SUBCASE("Hilbert system with damping agrees within the forcing tolerance") {
    BlockSparseSystem s({5});
    Eigen::MatrixXd H(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) H(i, j) = 1.0 / (i + j + 1);
    s.add_block(0, 0, H);
    s.set_damping(1e-3);
    s.add_rhs(0, Eigen::VectorXd::Ones(5));
    const Eigen::VectorXd xd = direct_solve(s);
    const PcgResult r = pcg_solve(s, 1000, 0.1);
    CHECK(r.converged);
    CHECK((s.multiply(r.x) - s.rhs()).norm() <= 0.1 * s.rhs().norm());
    CHECK((s.multiply(xd) - s.rhs()).norm() <= 1e-8 * s.rhs().norm());
  }
  SUBCASE("error energy norm is monotone") {
    std::mt19937 rng(5);
    BlockSparseSystem s = random_system(rng, 40);
    const Eigen::VectorXd xstar = direct_solve(s);
    double prev = std::numeric_limits<double>::infinity();
    // Re-run PCG with increasing iteration caps; the H-norm of the error
    // never increases (conjugate-gradient optimality).
    for (int cap = 1; cap <= 25; ++cap) {
      const PcgResult r = pcg_solve(s, cap, 1e-16);
      const Eigen::VectorXd e = r.x - xstar;
      const double enorm = std::sqrt(std::max(0.0, e.dot(s.multiply(e))));
      CHECK(enorm <= prev + 1e-10);
      prev = enorm;
      if (r.converged) break;
    }
  }
}

TEST_CASE("block accumulation and matvec symmetry") {
  std::mt19937 rng(9);
  BlockSparseSystem s = random_system(rng, 50);
  const Eigen::MatrixXd D = s.dense();
  CHECK((D - D.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(
        s.dimension(), [&](Eigen::Index) { return val(rng); });
    CHECK((s.multiply(x) - D * x).norm() < 1e-10 * std::max(1.0, x.norm()));
  }
}

TEST_CASE("singular preconditioner block falls back to scalar Jacobi") {
  // Second block receives no residual contributions and the system is
  // undamped, so its diagonal block is singular.
  BlockSparseSystem s({2, 2});
  s.add_block(0, 0, 4.0 * Eigen::MatrixXd::Identity(2, 2));
  s.add_rhs(0, Eigen::Vector2d(1.0, 2.0));
  const PcgResult r = pcg_solve(s);
  CHECK(r.jacobi_fallback);
  CHECK((r.x.head<2>() - Eigen::Vector2d(0.25, 0.5)).norm() < 1e-10);
}
