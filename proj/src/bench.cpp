#include "rnls/bench.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "rnls/additive_filter.h"
#include "rnls/asker.h"
#include "rnls/baselines.h"
#include "rnls/regemm.h"

namespace rnls {

Method parse_method(const std::string& name) {
  if (name == "irls") return Method::irls;
  if (name == "gnc") return Method::gnc;
  if (name == "mhq") return Method::mhq;
  if (name == "asker") return Method::asker;
  if (name == "regemm") return Method::regemm;
  if (name == "addfilter") return Method::addfilter;
  throw std::invalid_argument("unknown method: " + name);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::irls: return "irls";
    case Method::gnc: return "gnc";
    case Method::mhq: return "mhq";
    case Method::asker: return "asker";
    case Method::regemm: return "regemm";
    case Method::addfilter: return "addfilter";
  }
  return "unknown";
}

SolverTrace run_method(Method method, const Problem& problem,
                       const Eigen::VectorXd& theta0, const MethodParams& params) {
  switch (method) {
    case Method::irls: {
      IrlsOptions o;
      o.base = params.base;
      return irls_solve(problem, theta0, o);
    }
    case Method::gnc: {
      GncOptions o;
      o.base = params.base;
      o.schedule.levels = params.gnc_levels;
      return gnc_solve(problem, theta0, o);
    }
    case Method::mhq: {
      MhqOptions o;
      o.base = params.base;
      return mhq_solve(problem, theta0, o);
    }
    case Method::asker: {
      AskerOptions o;
      o.base = params.base;
      o.mu_f = params.mu_f;
      o.alpha = params.alpha;
      o.s_init = params.s_init;
      return asker_solve(problem, theta0, o);
    }
    case Method::regemm: {
      RegemmOptions o;
      o.base = params.base;
      o.eta = params.eta;
      return regemm_solve(problem, theta0, o);
    }
    case Method::addfilter: {
      AddFilterOptions o;
      o.base = params.base;
      o.mu_f = params.mu_f;
      o.alpha = params.alpha;
      return addfilter_solve(problem, theta0, o);
    }
  }
  throw std::invalid_argument("run_method: bad method");
}

Mean1DInstance make_mean1d_instance(const Escape1DConfig& cfg, unsigned trial) {
  std::mt19937_64 rng(cfg.seed * 1000003u + trial);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int n_out = static_cast<int>(std::llround(cfg.outlier_fraction * cfg.n_points));
  const int n_in = cfg.n_points - n_out;

  Mean1DInstance inst;
  inst.spec.kernel = smooth_truncated_kernel(cfg.tau);
  inst.spec.data.resize(cfg.n_points);
  for (int i = 0; i < n_in; ++i)
    inst.spec.data[i] = cfg.inlier_sigma * gauss(rng);
  for (int i = 0; i < n_out; ++i)
    inst.spec.data[n_in + i] =
        cfg.separation + cfg.outlier_spread * (2.0 * unit(rng) - 1.0);
  inst.theta0 = cfg.separation;

  const double lo = inst.spec.data.minCoeff() - 2.0 * cfg.tau;
  const double hi = inst.spec.data.maxCoeff() + 2.0 * cfg.tau;
  inst.oracle = brute_force_1d(inst.spec, lo, hi, cfg.tau / 50.0);
  return inst;
}

std::vector<EscapeRow> escape_experiment_1d(const std::vector<Method>& methods,
                                            int trials, const Escape1DConfig& cfg,
                                            const MethodParams& params) {
  std::vector<EscapeRow> rows;
  for (Method m : methods) rows.push_back({to_string(m), trials, 0, 0.0});
  for (int t = 0; t < trials; ++t) {
    const Mean1DInstance inst = make_mean1d_instance(cfg, static_cast<unsigned>(t));
    const Problem problem = make_robust_mean_problem(inst.spec, inst.theta0);
    const Eigen::VectorXd theta0 = problem.initial_state();
    for (size_t k = 0; k < methods.size(); ++k) {
      const SolverTrace trace = run_method(methods[k], problem, theta0, params);
      if (trace.final_psi <= inst.oracle.value + cfg.success_tol)
        ++rows[k].successes;
    }
  }
  for (auto& r : rows)
    r.rate = trials > 0 ? static_cast<double>(r.successes) / trials : 0.0;
  return rows;
}

Eigen::VectorXd perturb_ba_state(const Problem& problem, const SynthBa& synth,
                                 const EscapeBaConfig& cfg, unsigned seed) {
  std::mt19937_64 rng(seed * 7919u + 13u);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd theta = synth.ground_truth;
  const int nc = synth.dataset.num_cameras();
  for (int c = 0; c < nc; ++c) {
    for (int k = 0; k < 3; ++k) theta[6 * c + k] += cfg.perturb_rot * gauss(rng);
    for (int k = 3; k < 6; ++k) theta[6 * c + k] += cfg.perturb_trans * gauss(rng);
  }
  for (int i = 6 * nc; i < theta.size(); ++i)
    theta[i] += cfg.perturb_point * gauss(rng);
  problem.normalize_state(theta);
  return theta;
}

std::vector<EscapeRow> escape_experiment_ba(const std::vector<Method>& methods,
                                            int trials, const EscapeBaConfig& cfg,
                                            const MethodParams& params) {
  std::vector<EscapeRow> rows;
  for (Method m : methods) rows.push_back({to_string(m), trials, 0, 0.0});
  const double planted_rate = 1.0 - cfg.synth.outlier_fraction;
  for (int t = 0; t < trials; ++t) {
    SynthBaConfig sc = cfg.synth;
    sc.seed = cfg.synth.seed + static_cast<unsigned>(t);
    const SynthBa synth = synth_ba(sc);
    const Problem problem =
        make_reprojection_problem(synth.dataset, smooth_truncated_kernel(cfg.tau));
    const Eigen::VectorXd theta0 = perturb_ba_state(problem, synth, cfg, sc.seed);
    for (size_t k = 0; k < methods.size(); ++k) {
      const SolverTrace trace = run_method(methods[k], problem, theta0, params);
      const double rate = inlier_rate(problem, trace.final_theta,
                                      params.base.inlier_threshold);
      if (rate >= planted_rate - cfg.rate_slack) ++rows[k].successes;
    }
  }
  for (auto& r : rows)
    r.rate = trials > 0 ? static_cast<double>(r.successes) / trials : 0.0;
  return rows;
}

}  // namespace rnls
