#pragma once

#include <vector>

#include "timetable.hpp"
#include "types.hpp"

namespace trex {

// Precomputed transfers between stop events. The outgoing transfers of an
// event form a contiguous run sorted by target event id; a transfer's id is
// its position in the flattened array. Ranks are filled in by customization
// and default to zero.
struct TransferSet {
  std::vector<std::uint32_t> offset;  // size |events|+1
  std::vector<EventId> to;
  std::vector<Rank> rank;

  std::size_t size() const { return to.size(); }
  std::uint32_t begin(EventId e) const { return offset[e]; }
  std::uint32_t end(EventId e) const { return offset[e + 1]; }
  bool contains(EventId from, EventId target) const;
};

TransferSet generate_transfers(const Timetable& tt, unsigned threads = 1);

// Drops transfers that immediately ride back to the stop they came from when
// the one-stop-earlier transfer also exists.
void prune_uturn(const Timetable& tt, TransferSet& ts, unsigned threads = 1);

// Drops transfers whose every exit is matched, no later, by journeys that
// leave the source trip at a later stop.
void prune_latest_exit(const Timetable& tt, TransferSet& ts, unsigned threads = 1);

}  // namespace trex
