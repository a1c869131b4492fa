#pragma once

#include <vector>

namespace rnls {

struct FilterPair {
  double f = 0.0;
  double h = 0.0;
};

// a dominates b iff a is strictly better in both coordinates.
bool dominates(const FilterPair& a, const FilterPair& b);

// Set of mutually non-dominating (objective, constraint-violation) pairs.
// The forbidden region is the union of the entries' upper-right quadrants.
// Each iteration first pushes a margin-shifted temporary entry
// (f - alpha h, h - alpha h); after the step it is either removed (objective
// decreased) or promoted to a permanent entry.
class Filter {
 public:
  struct Handle {
    int id = -1;
  };
  struct Entry {
    FilterPair pair;
    bool permanent = false;
    int id = -1;
  };

  explicit Filter(double alpha);

  double alpha() const { return alpha_; }
  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }

  // True iff no entry (temporary entries included) dominates the candidate.
  bool accepts(const FilterPair& candidate) const;

  Handle push_temporary(double f_t, double h_t);

  // objective_decreased: remove the temporary entry. Otherwise promote it,
  // dropping it when its margin h is not strictly positive or when an
  // existing permanent entry already dominates it, and pruning permanent
  // entries it dominates.
  void resolve_temporary(Handle handle, bool objective_decreased);

 private:
  double alpha_;
  int next_id_ = 0;
  std::vector<Entry> entries_;
};

}  // namespace rnls
