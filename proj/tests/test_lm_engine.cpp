#include <doctest.h>

#include <Eigen/Dense>

#include "rnls/lm_engine.h"

using namespace rnls;

namespace {

Problem shifted_quadratic(double target, double theta0) {
  Problem p(RobustKernel(KernelKind::quadratic, 1.0));
  p.add_block(Eigen::VectorXd::Constant(1, theta0));
  p.add_residual(std::make_shared<FunctionResidual>(
                     1,
                     [target](const auto& params, Eigen::VectorXd& r,
                              std::vector<Eigen::MatrixXd>* J) {
                       r[0] = params[0][0] - target;
                       if (J) (*J)[0] = Eigen::MatrixXd::Ones(1, 1);
                       return true;
                     }),
                 {0});
  return p;
}

}  // namespace

TEST_CASE("lm_step is Newton-exact on a quadratic bowl as damping vanishes") {
  Problem p = shifted_quadratic(3.0, 0.0);
  LMConfig cfg;
  const LMStepResult r =
      lm_step(p, p.initial_state(), Eigen::VectorXd::Ones(1), 1e-12, cfg);
  CHECK(r.accepted);
  CHECK(r.attempts == 1);
  CHECK(r.theta[0] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("rejected candidate multiplies the damping by 10") {
  // Gauss-Newton overshoots heavily on r = theta^2 - 1 near theta = 0.1.
  Problem p(RobustKernel(KernelKind::quadratic, 1.0));
  p.add_block(Eigen::VectorXd::Constant(1, 0.1));
  p.add_residual(std::make_shared<FunctionResidual>(
                     1,
                     [](const auto& params, Eigen::VectorXd& r,
                        std::vector<Eigen::MatrixXd>* J) {
                       r[0] = params[0][0] * params[0][0] - 1.0;
                       if (J)
                         (*J)[0] = Eigen::MatrixXd::Constant(1, 1, 2.0 * params[0][0]);
                       return true;
                     }),
                 {0});
  LMConfig cfg;
  cfg.max_retries = 0;
  const LMStepResult r =
      lm_step(p, p.initial_state(), Eigen::VectorXd::Ones(1), 1e-3, cfg);
  CHECK_FALSE(r.accepted);
  CHECK(r.lambda == doctest::Approx(1e-2));
  CHECK(r.theta[0] == doctest::Approx(0.1));  // state unchanged on failure
}

TEST_CASE("damping moves by exact factors of ten") {
  Problem p = shifted_quadratic(1.0, 0.0);
  LMConfig cfg;
  const LMStepResult r =
      lm_step(p, p.initial_state(), Eigen::VectorXd::Ones(1), 1e-3, cfg);
  CHECK(r.accepted);
  CHECK(r.lambda == doctest::Approx(1e-4).epsilon(1e-15));
}

TEST_CASE("two-block linear least squares reaches the closed form") {
  Eigen::MatrixXd A(3, 2);
  A << 1.0, 2.0, 0.5, -1.0, 2.0, 0.3;
  const Eigen::Vector3d b(1.0, -2.0, 0.7);
  Problem p(RobustKernel(KernelKind::quadratic, 1.0));
  p.add_block(Eigen::Vector2d::Zero());
  p.add_residual(std::make_shared<FunctionResidual>(
                     3,
                     [A, b](const auto& params, Eigen::VectorXd& r,
                            std::vector<Eigen::MatrixXd>* J) {
                       r = A * params[0] - b;
                       if (J) (*J)[0] = A;
                       return true;
                     }),
                 {0});
  const Eigen::Vector2d closed =
      (A.transpose() * A).ldlt().solve(A.transpose() * b);

  Eigen::VectorXd theta = p.initial_state();
  double lambda = 1e-3;
  LMConfig cfg;
  int accepted = 0;
  for (int i = 0; i < 3 && accepted < 3; ++i) {
    const LMStepResult r = lm_step(p, theta, Eigen::VectorXd::Ones(1), lambda, cfg);
    if (r.accepted) ++accepted;
    theta = r.theta;
    lambda = r.lambda;
    if ((theta - closed).norm() < 1e-10) break;
  }
  CHECK((theta - closed).norm() < 1e-10);
}

TEST_CASE("run_loop basics") {
  SUBCASE("max_iter zero keeps only the initial record") {
    auto initial = [] {
      IterationRecord r;
      r.psi = 1.0;
      return r;
    };
    LoopControls c;
    c.max_iter = 0;
    const SolverTrace t = run_loop(initial, [](int) { return StepOutcome{}; }, c);
    CHECK(t.records.size() == 1);
    CHECK(t.status == SolveStatus::max_iter_reached);
  }
  SUBCASE("stationarity at start converges after one check") {
    auto initial = [] {
      IterationRecord r;
      r.psi = 1.0;
      return r;
    };
    auto body = [](int) {
      StepOutcome o;
      o.stationary = true;
      return o;
    };
    LoopControls c;
    const SolverTrace t = run_loop(initial, body, c);
    CHECK(t.records.size() == 1);
    CHECK(t.status == SolveStatus::converged);
  }
  SUBCASE("consecutive failed steps stall the loop") {
    auto initial = [] { return IterationRecord{}; };
    auto body = [](int) {
      StepOutcome o;
      o.step_failed = true;
      o.record.psi = 1.0;
      return o;
    };
    LoopControls c;
    c.stall_limit = 2;
    const SolverTrace t = run_loop(initial, body, c);
    CHECK(t.status == SolveStatus::stalled);
    CHECK(t.records.size() == 3);  // initial + two failed iterations
  }
  SUBCASE("timestamps strictly increase and length is bounded") {
    auto initial = [] { return IterationRecord{}; };
    auto body = [](int i) {
      StepOutcome o;
      o.record.psi = 10.0 / i;  // keeps decreasing, no window stop
      return o;
    };
    LoopControls c;
    c.max_iter = 20;
    const SolverTrace t = run_loop(initial, body, c);
    CHECK(t.status == SolveStatus::max_iter_reached);
    CHECK(t.records.size() == 21);
    for (size_t i = 1; i < t.records.size(); ++i)
      CHECK(t.records[i].seconds > t.records[i - 1].seconds);
  }
  SUBCASE("sustained relative decrease below tolerance converges") {
    auto initial = [] {
      IterationRecord r;
      r.psi = 5.0;
      return r;
    };
    auto body = [](int) {
      StepOutcome o;
      o.record.psi = 5.0;  // flat
      return o;
    };
    LoopControls c;
    c.rel_window = 3;
    const SolverTrace t = run_loop(initial, body, c);
    CHECK(t.status == SolveStatus::converged);
    CHECK(t.records.size() == 4);  // initial + window
  }
}
