#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rnls {

struct ProfileCell {
  std::string method;
  std::string instance;
  double best_objective = 0.0;    // lower is better
  double best_inlier_rate = 0.0;  // higher is better
};

// Right-continuous non-decreasing step curve: rho(x) = fraction of instances
// whose performance ratio is <= x.
struct ProfileCurve {
  std::string method;
  std::vector<double> ratios;  // sorted finite ratios, one per solved instance
  int num_instances = 0;

  double rho(double x) const;
};

struct ProfileTable {
  std::vector<ProfileCell> cells;
  std::vector<ProfileCurve> objective;
  std::vector<ProfileCurve> inlier_rate;
  std::vector<std::string> missing;  // "method/instance" pairs treated as failed
};

// Performance profiles over the cell grid: the objective ratio is
// value / best_value (best 0 handled as ratio 1 for exact ties, failed
// otherwise), the inlier ratio is best_rate / rate. Missing (method,
// instance) pairs count as failed, i.e. ratio infinity.
ProfileTable make_profile(const std::vector<ProfileCell>& cells);

// CSV rows: metric,method,ratio,rho.
void write_profile_csv(const ProfileTable& table, std::ostream& out);

}  // namespace rnls
