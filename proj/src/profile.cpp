#include "rnls/profile.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

namespace rnls {

double ProfileCurve::rho(double x) const {
  if (num_instances == 0) return 0.0;
  const auto it = std::upper_bound(ratios.begin(), ratios.end(), x);
  return static_cast<double>(it - ratios.begin()) / num_instances;
}

ProfileTable make_profile(const std::vector<ProfileCell>& cells) {
  ProfileTable table;
  table.cells = cells;

  std::vector<std::string> methods, instances;
  std::map<std::pair<std::string, std::string>, const ProfileCell*> grid;
  for (const ProfileCell& c : cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
      methods.push_back(c.method);
    if (std::find(instances.begin(), instances.end(), c.instance) ==
        instances.end())
      instances.push_back(c.instance);
    grid[{c.method, c.instance}] = &c;
  }
  if (methods.empty() || instances.empty())
    throw std::invalid_argument("make_profile: no cells");

  const double inf = std::numeric_limits<double>::infinity();
  auto build = [&](auto metric, bool lower_is_better) {
    std::vector<ProfileCurve> curves;
    std::map<std::string, double> best;
    for (const auto& inst : instances) {
      double b = lower_is_better ? inf : -inf;
      for (const auto& m : methods) {
        auto it = grid.find({m, inst});
        if (it == grid.end()) continue;
        const double v = metric(*it->second);
        b = lower_is_better ? std::min(b, v) : std::max(b, v);
      }
      best[inst] = b;
    }
    for (const auto& m : methods) {
      ProfileCurve curve;
      curve.method = m;
      curve.num_instances = static_cast<int>(instances.size());
      for (const auto& inst : instances) {
        auto it = grid.find({m, inst});
        if (it == grid.end()) {
          table.missing.push_back(m + "/" + inst);
          continue;  // failed: ratio infinity, never enters the curve
        }
        const double v = metric(*it->second);
        const double b = best[inst];
        double ratio;
        if (lower_is_better)
          ratio = b == 0.0 ? (v == 0.0 ? 1.0 : inf) : v / b;
        else
          ratio = v == 0.0 ? (b == 0.0 ? 1.0 : inf) : b / v;
        if (std::isfinite(ratio)) curve.ratios.push_back(ratio);
      }
      std::sort(curve.ratios.begin(), curve.ratios.end());
      curves.push_back(std::move(curve));
    }
    return curves;
  };

  table.objective =
      build([](const ProfileCell& c) { return c.best_objective; }, true);
  // Deduplicate missing-pair reports from the two passes.
  table.inlier_rate =
      build([](const ProfileCell& c) { return c.best_inlier_rate; }, false);
  std::sort(table.missing.begin(), table.missing.end());
  table.missing.erase(std::unique(table.missing.begin(), table.missing.end()),
                      table.missing.end());
  return table;
}

void write_profile_csv(const ProfileTable& table, std::ostream& out) {
  out << "metric,method,ratio,rho\n";
  char buf[96];
  auto emit = [&](const char* metric, const std::vector<ProfileCurve>& curves) {
    for (const ProfileCurve& c : curves) {
      for (double r : c.ratios) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n", metric,
                      c.method.c_str(), r, c.rho(r));
        out << buf;
      }
    }
  };
  emit("objective", table.objective);
  emit("inlier_rate", table.inlier_rate);
}

}  // namespace rnls
