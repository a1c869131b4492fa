// Benchmark harness: run any solver on a BAL file or synthetic instance,
// emit per-iteration trace CSVs, aggregate Dolan-More performance profiles,
// and run local-minima escape experiments.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "rnls/ba.h"
#include "rnls/bench.h"
#include "rnls/profile.h"
#include "rnls/trace_io.h"

namespace {

constexpr int kExitConverged = 0;
constexpr int kExitMaxIter = 2;
constexpr int kExitStalled = 3;
constexpr int kExitUsage = 64;

std::map<std::string, std::string> parse_kv(const std::string& body) {
  std::map<std::string, std::string> kv;
  std::istringstream in(body);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

double kv_num(const std::map<std::string, std::string>& kv, const std::string& key,
              double fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stod(it->second);
}

struct LoadedInstance {
  rnls::Problem problem;
  Eigen::VectorXd theta0;
  std::string name;
};

LoadedInstance load_instance(const std::string& input, const std::string& synthetic,
                             double tau, unsigned seed) {
  const rnls::RobustKernel kernel = rnls::smooth_truncated_kernel(tau);
  if (!input.empty()) {
    std::ifstream file(input);
    if (!file) throw std::runtime_error("cannot open " + input);
    const rnls::BalDataset dataset = rnls::parse_bal(file);
    rnls::Problem problem = rnls::make_reprojection_problem(dataset, kernel);
    Eigen::VectorXd theta0 = problem.initial_state();
    return {std::move(problem), std::move(theta0),
            std::filesystem::path(input).stem().string()};
  }

  const auto colon = synthetic.find(':');
  const std::string family = synthetic.substr(0, colon);
  const auto kv =
      parse_kv(colon == std::string::npos ? "" : synthetic.substr(colon + 1));

  if (family == "mean1d") {
    rnls::Escape1DConfig cfg;
    cfg.n_points = static_cast<int>(kv_num(kv, "n", cfg.n_points));
    cfg.outlier_fraction = kv_num(kv, "outliers", cfg.outlier_fraction);
    cfg.inlier_sigma = kv_num(kv, "sigma", cfg.inlier_sigma);
    cfg.separation = kv_num(kv, "sep", cfg.separation);
    cfg.outlier_spread = kv_num(kv, "spread", cfg.outlier_spread);
    cfg.tau = tau;
    cfg.seed = seed;
    const rnls::Mean1DInstance inst = rnls::make_mean1d_instance(cfg, 0);
    double theta0 = inst.theta0;  // adversarial: the outlier mode
    if (auto it = kv.find("init"); it != kv.end()) {
      if (it->second == "oracle")
        theta0 = inst.oracle.argmin;
      else if (it->second != "outlier")
        theta0 = std::stod(it->second);
    }
    rnls::Problem problem = rnls::make_robust_mean_problem(inst.spec, theta0);
    Eigen::VectorXd t0 = problem.initial_state();
    return {std::move(problem), std::move(t0), "mean1d-" + std::to_string(seed)};
  }
  if (family == "ba") {
    rnls::SynthBaConfig sc;
    sc.cameras = static_cast<int>(kv_num(kv, "cams", sc.cameras));
    sc.points = static_cast<int>(kv_num(kv, "pts", sc.points));
    sc.observations_per_point = static_cast<int>(kv_num(kv, "obs", 4));
    sc.noise_px = kv_num(kv, "noise", sc.noise_px);
    sc.outlier_fraction = kv_num(kv, "outliers", sc.outlier_fraction);
    sc.distortion = kv_num(kv, "distortion", 0.0) != 0.0;
    sc.seed = seed;
    const rnls::SynthBa synth = rnls::synth_ba(sc);
    rnls::Problem problem = rnls::make_reprojection_problem(synth.dataset, kernel);
    rnls::EscapeBaConfig ec;
    ec.perturb_rot = kv_num(kv, "perturb-rot", ec.perturb_rot);
    ec.perturb_trans = kv_num(kv, "perturb", ec.perturb_trans);
    ec.perturb_point = kv_num(kv, "perturb", ec.perturb_point);
    Eigen::VectorXd theta0 = rnls::perturb_ba_state(problem, synth, ec, seed);
    return {std::move(problem), std::move(theta0), "synthba-" + std::to_string(seed)};
  }
  throw std::invalid_argument("unknown synthetic family '" + family + "'");
}

int status_code(rnls::SolveStatus s) {
  switch (s) {
    case rnls::SolveStatus::converged: return kExitConverged;
    case rnls::SolveStatus::max_iter_reached: return kExitMaxIter;
    case rnls::SolveStatus::stalled: return kExitStalled;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust non-linear least-squares benchmark harness"};
  app.require_subcommand(1);

  // ------------------------------------------------------------------ run
  auto* run = app.add_subcommand("run", "run one solver on one instance");
  std::string method_name = "irls", input, synthetic, out_path, instance_name;
  double tau = 1.0, eta = 0.5, mu_f = 0.9, alpha = 0.01, s_init = 5.0;
  double inlier_threshold = 1.0;
  int max_iter = 50, gnc_levels = 5;
  unsigned seed = 0;
  run->add_option("--method", method_name,
                  "irls | gnc | mhq | asker | regemm | addfilter");
  auto* in_opt = run->add_option("--input", input, "BAL text file");
  auto* syn_opt = run->add_option(
      "--synthetic", synthetic,
      "synthetic spec, e.g. mean1d:n=30,outliers=0.3 or ba:cams=10,pts=200");
  in_opt->excludes(syn_opt);
  run->add_option("--tau", tau, "kernel truncation scale (residual units)");
  run->add_option("--max-iter", max_iter, "outer iteration budget");
  run->add_option("--eta", eta, "regemm sufficient-decrease fraction");
  run->add_option("--mu-f", mu_f, "filter-solver objective weight");
  run->add_option("--alpha", alpha, "filter margin");
  run->add_option("--init-scale", s_init, "asker initial scale variables");
  run->add_option("--gnc-levels", gnc_levels, "gnc schedule depth");
  run->add_option("--seed", seed, "synthetic generator seed");
  run->add_option("--inlier-threshold", inlier_threshold, "pixels");
  run->add_option("--out", out_path, "trace CSV path (stdout when omitted)");
  run->add_option("--instance", instance_name, "instance tag for the trace");

  // -------------------------------------------------------------- profile
  auto* profile = app.add_subcommand(
      "profile", "Dolan-More performance profiles over trace files");
  std::vector<std::string> trace_paths;
  std::string profile_out;
  profile->add_option("traces", trace_paths, "trace CSV files")->required();
  profile->add_option("--out", profile_out, "profile CSV path (stdout when omitted)");

  // --------------------------------------------------------------- escape
  auto* escape = app.add_subcommand(
      "escape", "success-rate experiment against the brute-force oracle");
  std::string family = "mean1d", methods_csv = "irls,asker,regemm", escape_out;
  int trials = 100;
  double success_tol = 1e-4, esc_outliers = 0.3, esc_sep = 10.0;
  int esc_n = 30;
  escape->add_option("--family", family, "mean1d | ba");
  escape->add_option("--methods", methods_csv, "comma-separated method list");
  escape->add_option("--trials", trials, "number of random instances");
  escape->add_option("--seed", seed, "base seed");
  escape->add_option("--tau", tau, "kernel truncation scale");
  escape->add_option("--max-iter", max_iter, "per-run iteration budget");
  escape->add_option("--success-tol", success_tol,
                     "objective distance to the oracle that counts as success");
  escape->add_option("--outliers", esc_outliers, "outlier fraction");
  escape->add_option("--n", esc_n, "points per 1-D instance");
  escape->add_option("--sep", esc_sep, "outlier mode separation");
  escape->add_option("--out", escape_out, "summary CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) {
      if (input.empty() && synthetic.empty()) {
        std::cerr << "error: need --input or --synthetic\n";
        return kExitUsage;
      }
      const rnls::Method method = rnls::parse_method(method_name);
      LoadedInstance inst = load_instance(input, synthetic, tau, seed);
      if (!instance_name.empty()) inst.name = instance_name;

      rnls::MethodParams params;
      params.base.max_iter = max_iter;
      params.base.inlier_threshold = inlier_threshold;
      params.eta = eta;
      params.mu_f = mu_f;
      params.alpha = alpha;
      params.s_init = s_init;
      params.gnc_levels = gnc_levels;

      const rnls::SolverTrace trace =
          rnls::run_method(method, inst.problem, inst.theta0, params);

      const rnls::TraceMeta meta{method_name, inst.name};
      if (out_path.empty()) {
        rnls::write_trace_csv(trace, meta, std::cout);
      } else {
        std::ofstream file(out_path);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        rnls::write_trace_csv(trace, meta, file);
      }
      const rnls::IterationRecord& last = trace.records.back();
      std::cerr << "method=" << method_name << " instance=" << inst.name
                << " status=" << to_string(trace.status)
                << " iters=" << trace.records.size() - 1 << " psi=" << trace.final_psi
                << " inlier_rate=" << last.inlier_rate;
      if (!std::isnan(last.h)) std::cerr << " h=" << last.h;
      std::cerr << " seconds=" << last.seconds << "\n";
      return status_code(trace.status);
    }

    if (*profile) {
      std::vector<rnls::ProfileCell> cells;
      for (const std::string& path : trace_paths) {
        std::ifstream file(path);
        if (!file) throw std::runtime_error("cannot open " + path);
        rnls::TraceFile tf = rnls::read_trace_csv(file);
        if (tf.meta.method.empty()) {
          // Fall back to <instance>__<method>.csv naming.
          const std::string stem = std::filesystem::path(path).stem().string();
          const auto sep = stem.rfind("__");
          if (sep == std::string::npos)
            throw std::runtime_error(path + ": no method/instance metadata");
          tf.meta.instance = stem.substr(0, sep);
          tf.meta.method = stem.substr(sep + 2);
        }
        cells.push_back({tf.meta.method, tf.meta.instance, tf.best_psi(),
                         tf.best_inlier_rate()});
      }
      const rnls::ProfileTable table = rnls::make_profile(cells);
      if (profile_out.empty()) {
        rnls::write_profile_csv(table, std::cout);
      } else {
        std::ofstream file(profile_out);
        if (!file) throw std::runtime_error("cannot write " + profile_out);
        rnls::write_profile_csv(table, file);
      }
      for (const std::string& missing : table.missing)
        std::cerr << "warning: missing pair treated as failed: " << missing << "\n";
      return 0;
    }

    if (*escape) {
      std::vector<rnls::Method> methods;
      std::istringstream ms(methods_csv);
      std::string name;
      while (std::getline(ms, name, ','))
        if (!name.empty()) methods.push_back(rnls::parse_method(name));
      if (methods.empty()) {
        std::cerr << "error: no methods\n";
        return kExitUsage;
      }

      rnls::MethodParams params;
      params.base.max_iter = max_iter;
      std::vector<rnls::EscapeRow> rows;
      if (family == "mean1d") {
        rnls::Escape1DConfig cfg;
        cfg.n_points = esc_n;
        cfg.outlier_fraction = esc_outliers;
        cfg.separation = esc_sep;
        cfg.tau = tau;
        cfg.seed = seed;
        cfg.success_tol = success_tol;
        rows = rnls::escape_experiment_1d(methods, trials, cfg, params);
      } else if (family == "ba") {
        rnls::EscapeBaConfig cfg;
        cfg.synth.outlier_fraction = esc_outliers;
        cfg.synth.seed = seed;
        cfg.tau = tau;
        rows = rnls::escape_experiment_ba(methods, trials, cfg, params);
      } else {
        std::cerr << "error: unknown family " << family << "\n";
        return kExitUsage;
      }

      std::ostringstream csv;
      csv << "method,trials,successes,success_rate\n";
      for (const auto& r : rows) {
        csv << r.method << ',' << r.trials << ',' << r.successes << ',' << r.rate
            << '\n';
        std::cout << r.method << ": " << r.successes << "/" << r.trials << " ("
                  << 100.0 * r.rate << "%)\n";
      }
      if (!escape_out.empty()) {
        std::ofstream file(escape_out);
        if (!file) throw std::runtime_error("cannot write " + escape_out);
        file << csv.str();
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
