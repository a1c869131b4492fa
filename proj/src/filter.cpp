#include "rnls/filter.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rnls {

bool dominates(const FilterPair& a, const FilterPair& b) {
  return a.f < b.f && a.h < b.h;
}

Filter::Filter(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("Filter: margin alpha must be in (0, 1)");
}

bool Filter::accepts(const FilterPair& candidate) const {
  if (!std::isfinite(candidate.f) || !std::isfinite(candidate.h))
    throw std::invalid_argument("Filter::accepts: candidate must be finite");
  for (const Entry& e : entries_)
    if (dominates(e.pair, candidate)) return false;
  return true;
}

Filter::Handle Filter::push_temporary(double f_t, double h_t) {
  if (!std::isfinite(f_t) || !std::isfinite(h_t) || h_t < 0.0)
    throw std::invalid_argument("Filter::push_temporary: need finite f and h >= 0");
  Entry e;
  e.pair = {f_t - alpha_ * h_t, h_t - alpha_ * h_t};
  e.permanent = false;
  e.id = next_id_++;
  entries_.push_back(e);
  return Handle{e.id};
}

void Filter::resolve_temporary(Handle handle, bool objective_decreased) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) {
    return e.id == handle.id && !e.permanent;
  });
  if (it == entries_.end())
    throw std::invalid_argument("Filter::resolve_temporary: stale handle");

  const FilterPair pair = it->pair;
  entries_.erase(it);
  if (objective_decreased) return;

  // Zero-margin entries come from feasible iterates and are never retained.
  if (!(pair.h > 0.0)) return;

  // Skip entries that add nothing to the forbidden region.
  for (const Entry& e : entries_)
    if (e.permanent &&
        ((e.pair.f == pair.f && e.pair.h == pair.h) || dominates(e.pair, pair)))
      return;

  // Keep the filter minimal: drop permanent entries the new one dominates.
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                [&](const Entry& e) {
                                  return e.permanent && dominates(pair, e.pair);
                                }),
                 entries_.end());
  entries_.push_back(Entry{pair, true, next_id_++});
}

}  // namespace rnls
