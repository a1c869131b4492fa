#include <doctest.h>

#include <random>

#include "rnls/ba.h"
#include "rnls/problem.h"

using namespace rnls;

namespace {

Problem robust_mean(std::initializer_list<double> data, double tau, double theta0) {
  RobustMean1D spec;
  spec.data = Eigen::VectorXd::Map(data.begin(), static_cast<Eigen::Index>(data.size()));
  spec.kernel = smooth_truncated_kernel(tau);
  return make_robust_mean_problem(spec, theta0);
}

}  // namespace

TEST_CASE("robust objective on the 1-D mean instance") {
  Problem p = robust_mean({0, 0, 0, 10}, 1.0, 0.0);
  Eigen::VectorXd theta(1);
  theta << 0.0;
  Objective at0 = p.evaluate_objective(theta);
  CHECK(at0.value == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(at0.norms.size() == 4);
  CHECK(at0.norms[3] == doctest::Approx(10.0));

  theta << 10.0;
  CHECK(p.evaluate_objective(theta).value == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("all-zero residuals give zero objective") {
  Problem p = robust_mean({2, 2, 2}, 1.0, 2.0);
  CHECK(p.evaluate_objective(p.initial_state()).value == 0.0);
}

TEST_CASE("weighted lifted objective") {
  Problem p = robust_mean({0, 1, 2}, 1.0, 0.0);  // norms {0, 1, 2} at theta = 0
  const Eigen::VectorXd theta = p.initial_state();

  SUBCASE("unit weights, hand-summed lifted terms") {
    // (1/2)*1 + (1/2)*4 with zero bias at u = 1, plus the zero-residual term.
    Eigen::VectorXd u = Eigen::VectorXd::Ones(3);
    CHECK(p.evaluate_weighted_sq(theta, u) == doctest::Approx(2.5).epsilon(1e-14));
  }
  SUBCASE("zero weights pay N kappa(0)") {
    Problem q = robust_mean({5, 5, 5, 5}, 1.0, 0.0);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(4);
    CHECK(q.evaluate_weighted_sq(q.initial_state(), u) == doctest::Approx(1.0));
  }
  SUBCASE("touching weights reproduce the robust objective") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> tt(-5.0, 15.0);
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd th(1);
      th << tt(rng);
      const Objective obj = p.evaluate_objective(th);
      const Eigen::VectorXd u = omega(p.kernel(), obj.norms);
      CHECK(p.evaluate_weighted_sq(th, u) ==
            doctest::Approx(obj.value).epsilon(1e-12));
    }
  }
  SUBCASE("upper bound for arbitrary weights in [0,1]") {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> uu(0.0, 1.0);
    std::uniform_real_distribution<double> tt(-5.0, 15.0);
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd th(1);
      th << tt(rng);
      Eigen::VectorXd u(3);
      u << uu(rng), uu(rng), uu(rng);
      CHECK(p.evaluate_weighted_sq(th, u) >=
            p.evaluate_objective(th).value - 1e-12);
    }
  }
}

TEST_CASE("evaluation is deterministic") {
  Problem p = robust_mean({0.1, 2.7, -3.3, 8.9}, 1.3, 0.4);
  const Eigen::VectorXd theta = p.initial_state();
  const Objective a = p.evaluate_objective(theta);
  const Objective b = p.evaluate_objective(theta);
  CHECK(a.value == b.value);
  CHECK((a.norms.array() == b.norms.array()).all());
}

TEST_CASE("evaluation failure carries the block id") {
  Problem p;
  p.add_block(Eigen::VectorXd::Ones(1));
  auto ok = std::make_shared<FunctionResidual>(
      1, [](const auto& params, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>* J) {
        r[0] = params[0][0];
        if (J) (*J)[0] = Eigen::MatrixXd::Ones(1, 1);
        return true;
      });
  auto bad = std::make_shared<FunctionResidual>(
      1, [](const auto&, Eigen::VectorXd& r, std::vector<Eigen::MatrixXd>*) {
        r[0] = std::numeric_limits<double>::quiet_NaN();
        return true;
      });
  p.add_residual(ok, {0});
  p.add_residual(bad, {0});
  try {
    p.evaluate_objective(p.initial_state());
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.residual_block_id() == 1);
  }
}

TEST_CASE("validate catches dangling block references and empty problems") {
  Problem empty;
  empty.add_block(Eigen::VectorXd::Ones(2));
  CHECK_THROWS_AS(empty.validate(), ValidationError);

  Problem p;
  p.add_block(Eigen::VectorXd::Ones(1));
  p.add_residual(std::make_shared<FunctionResidual>(
                     1,
                     [](const auto&, Eigen::VectorXd& r,
                        std::vector<Eigen::MatrixXd>*) {
                       r[0] = 0.0;
                       return true;
                     }),
                 {5});
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("jacobian checker") {
  SUBCASE("linear residual matches exactly") {
    Problem p;
    p.add_block(Eigen::Vector2d(0.3, -0.7));
    Eigen::MatrixXd A(2, 2);
    A << 2.0, -1.0, 0.5, 3.0;
    p.add_residual(std::make_shared<FunctionResidual>(
                       2,
                       [A](const auto& params, Eigen::VectorXd& r,
                           std::vector<Eigen::MatrixXd>* J) {
                         r = A * params[0];
                         if (J) (*J)[0] = A;
                         return true;
                       }),
                   {0});
    const JacobianCheckReport rep = p.check_jacobian(p.initial_state(), 1e-6, 1e-9);
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-9);
  }
  SUBCASE("corrupted jacobian entry is flagged") {
    Problem p;
    p.add_block(Eigen::Vector2d(1.0, 2.0));
    p.add_residual(std::make_shared<FunctionResidual>(
                       1,
                       [](const auto& params, Eigen::VectorXd& r,
                          std::vector<Eigen::MatrixXd>* J) {
                         r[0] = params[0][0] + params[0][1];
                         if (J) {
                           (*J)[0] = Eigen::MatrixXd::Ones(1, 2);
                           (*J)[0](0, 0) += 0.1;  // injected fault
                         }
                         return true;
                       }),
                   {0});
    const JacobianCheckReport rep = p.check_jacobian(p.initial_state(), 1e-6, 1e-3);
    CHECK_FALSE(rep.passed);
    CHECK(rep.max_rel_error > 0.05);
  }
  SUBCASE("step validation") {
    Problem p = robust_mean({1.0}, 1.0, 0.0);
    CHECK_THROWS_AS(p.check_jacobian(p.initial_state(), 0.0, 1e-6),
                    std::invalid_argument);
    CHECK_THROWS_AS(p.check_jacobian(p.initial_state(), 0.1, 1e-6),
                    std::invalid_argument);
  }
}
