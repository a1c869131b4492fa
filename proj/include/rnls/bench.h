#pragma once

#include <string>
#include <vector>

#include "rnls/ba.h"
#include "rnls/lm_engine.h"
#include "rnls/problem.h"

namespace rnls {

enum class Method { irls, gnc, mhq, asker, regemm, addfilter };

Method parse_method(const std::string& name);
std::string to_string(Method m);

// Union of the per-method knobs exposed on the command line.
struct MethodParams {
  SolveOptions base;
  double eta = 0.5;     // regemm
  double mu_f = 0.9;    // asker / addfilter
  double alpha = 0.01;  // filter margin
  double s_init = 5.0;  // asker
  int gnc_levels = 5;
};

SolverTrace run_method(Method method, const Problem& problem,
                       const Eigen::VectorXd& theta0, const MethodParams& params);

// ---------------------------------------------------------------------------
// Escape experiments

struct EscapeRow {
  std::string method;
  int trials = 0;
  int successes = 0;
  double rate = 0.0;
};

// 1-D robust mean family: inliers around zero, an outlier cluster at
// `separation`, initialization at the outlier mode. A trial succeeds when the
// final objective is within success_tol of the brute-force global optimum.
struct Escape1DConfig {
  int n_points = 30;
  double outlier_fraction = 0.3;
  double inlier_sigma = 0.1;
  double outlier_spread = 1.0;
  double separation = 10.0;
  double tau = 1.0;
  unsigned seed = 0;
  double success_tol = 1e-4;
};

struct Mean1DInstance {
  RobustMean1D spec;
  double theta0 = 0.0;  // the outlier mode
  BruteForce1DResult oracle;
};

Mean1DInstance make_mean1d_instance(const Escape1DConfig& config, unsigned trial);

std::vector<EscapeRow> escape_experiment_1d(const std::vector<Method>& methods,
                                            int trials, const Escape1DConfig& config,
                                            const MethodParams& params);

// Synthetic bundle adjustment: start from a perturbed ground truth; a trial
// succeeds when the final inlier rate is within rate_slack of the planted
// inlier fraction.
struct EscapeBaConfig {
  SynthBaConfig synth;
  double perturb_point = 0.5;   // absolute, scene units
  double perturb_rot = 0.05;    // radians
  double perturb_trans = 0.5;
  double rate_slack = 0.05;
  double tau = 1.0;
};

Eigen::VectorXd perturb_ba_state(const Problem& problem, const SynthBa& synth,
                                 const EscapeBaConfig& config, unsigned seed);

std::vector<EscapeRow> escape_experiment_ba(const std::vector<Method>& methods,
                                            int trials, const EscapeBaConfig& config,
                                            const MethodParams& params);

}  // namespace rnls
