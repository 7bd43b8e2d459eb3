#pragma once

#include <vector>

#include "partition.hpp"
#include "query.hpp"
#include "timetable.hpp"
#include "transfers.hpp"
#include "types.hpp"

// Reference implementations used by tests and the bench verifier. They work
// directly on the timetable, never on precomputed transfers, overlays or
// ranks, and favour obviousness over speed.

namespace trex {

struct SyntheticSpec {
  std::uint32_t stops = 80;
  std::uint32_t clusters = 4;
  std::uint32_t lines = 14;
  std::uint32_t trips_per_line = 4;
  double inter_fraction = 0.3;     // share of non-backbone lines spanning clusters
  double footpath_density = 0.6;   // expected footpath edges per stop, in cluster
  Time horizon = 86400;
  std::uint64_t seed = 1;
};

Timetable gen_synthetic(const SyntheticSpec& spec);

// Earliest-arrival Pareto front by exhaustive per-round relaxation of every
// trip in the network.
std::vector<FrontEntry> oracle_front(const Timetable& tt, StopId from, StopId to, Time dep,
                                     unsigned max_rounds = 16);

// Candidate departures from `from` in [start, end], deduplicated, descending.
std::vector<Time> profile_departures(const Timetable& tt, StopId from, Time start, Time end);

// Union of the per-departure fronts; each entry keeps the latest departure
// that attains it.
std::vector<ProfileEntry> oracle_profile(const Timetable& tt, StopId from, StopId to,
                                         Time start, Time end, unsigned max_rounds = 16);

struct CellReach {
  EventId obe;
  std::uint32_t trips;
  bool operator==(const CellReach&) const = default;
};

// Breadth-first enumeration of every journey that starts at an in-bound
// border event, stays inside the cell and ends at an out-bound border event,
// using only transfers of at least min_rank. Returns the minimal trip count
// per reached out-bound event, sorted by event id.
std::vector<CellReach> oracle_cell_traversal(const Timetable& tt, const TransferSet& ts,
                                             const NestedPartition& part, unsigned level,
                                             CellId cell, EventId source_ibe, Rank min_rank,
                                             unsigned max_rounds = 16);

}  // namespace trex
