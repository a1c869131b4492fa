#include "rnls/trace_io.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "rnls/errors.h"

namespace rnls {

namespace {

std::string format_value(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(const SolverTrace& trace, const TraceMeta& meta,
                     std::ostream& out) {
  if (!meta.method.empty() || !meta.instance.empty())
    out << "# method=" << meta.method << " instance=" << meta.instance
        << " status=" << to_string(trace.status) << '\n';
  out << "iter,seconds,psi,aux,h,inlier_rate,step_kind,accepted\n";
  for (const IterationRecord& r : trace.records) {
    out << r.iter << ',' << format_value(r.seconds) << ',' << format_value(r.psi)
        << ',' << format_value(r.aux) << ',' << format_value(r.h) << ','
        << format_value(r.inlier_rate) << ',' << to_string(r.step_kind) << ','
        << (r.accepted ? 1 : 0) << '\n';
  }
}

double TraceFile::best_psi() const {
  double best = std::numeric_limits<double>::infinity();
  for (const TraceRow& r : rows)
    if (!std::isnan(r.psi)) best = std::min(best, r.psi);
  return best;
}

double TraceFile::best_inlier_rate() const {
  double best = 0.0;
  for (const TraceRow& r : rows)
    if (!std::isnan(r.inlier_rate)) best = std::max(best, r.inlier_rate);
  return best;
}

TraceFile read_trace_csv(std::istream& in) {
  TraceFile file;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string token;
      while (meta >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "method") file.meta.method = value;
        if (key == "instance") file.meta.instance = value;
      }
      continue;
    }
    if (!have_header) {
      if (line.rfind("iter,", 0) != 0)
        throw ParseError(line_no, "expected trace header row");
      have_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream row(line);
    while (std::getline(row, field, ',')) fields.push_back(field);
    while (fields.size() < 8) fields.emplace_back();
    if (fields.size() != 8)
      throw ParseError(line_no, "expected 8 comma-separated fields");
    auto num = [&](const std::string& s) {
      return s.empty() ? IterationRecord::kUnset : std::stod(s);
    };
    TraceRow r;
    try {
      r.iter = std::stoi(fields[0]);
      r.seconds = num(fields[1]);
      r.psi = num(fields[2]);
      r.aux = num(fields[3]);
      r.h = num(fields[4]);
      r.inlier_rate = num(fields[5]);
      r.step_kind = fields[6];
      r.accepted = !fields[7].empty() && fields[7] != "0";
    } catch (const std::exception&) {
      throw ParseError(line_no, "malformed trace row");
    }
    file.rows.push_back(std::move(r));
  }
  if (!have_header) throw ParseError(line_no, "missing trace header row");
  return file;
}

}  // namespace rnls
