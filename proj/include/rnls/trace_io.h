#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rnls/lm_engine.h"

namespace rnls {

struct TraceMeta {
  std::string method;
  std::string instance;
};

// Plain CSV, one row per iteration, fixed column order:
//   iter,seconds,psi,aux,h,inlier_rate,step_kind,accepted
// Unset values print as empty fields. A leading "# method=... instance=..."
// comment carries the metadata when present.
void write_trace_csv(const SolverTrace& trace, const TraceMeta& meta,
                     std::ostream& out);

struct TraceRow {
  int iter = 0;
  double seconds = 0.0;
  double psi = IterationRecord::kUnset;
  double aux = IterationRecord::kUnset;
  double h = IterationRecord::kUnset;
  double inlier_rate = IterationRecord::kUnset;
  std::string step_kind;
  bool accepted = false;
};

struct TraceFile {
  TraceMeta meta;
  std::vector<TraceRow> rows;

  double best_psi() const;
  double best_inlier_rate() const;
};

TraceFile read_trace_csv(std::istream& in);

}  // namespace rnls
