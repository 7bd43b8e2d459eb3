#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "trex/partition.hpp"
#include "trex/timetable.hpp"
#include "trex/transfers.hpp"
#include "trex/types.hpp"

namespace trex {

// Incoming border events of every cell at `level`: pairs of (cell, events),
// where each event T[i] lies outside the cell and its successor T[i+1] inside.
// Cells and event lists are sorted by id.
std::vector<std::pair<CellId, std::vector<EventId>>> collect_border_events(
    const Timetable& tt, const NestedPartition& part, unsigned level);

// For each event and level, the first stop index at or after the event's own
// whose cell differs at that level. 0xFF means the trip never leaves the cell.
struct SuccessorTable {
  std::uint32_t levels = 0;
  std::size_t num_events = 0;
  std::vector<std::uint8_t> data;

  static constexpr std::uint8_t kNone = 0xFF;

  std::uint8_t raw(unsigned level, EventId e) const { return data[level * num_events + e]; }
  // Resolved against the trip: kNone maps to the trip length.
  std::uint32_t at(const Timetable& tt, unsigned level, TripId trip, EventId e) const {
    std::uint8_t v = raw(level, e);
    return v == kNone ? tt.trip_length(trip) : v;
  }
};

SuccessorTable build_successor_table(const Timetable& tt, const NestedPartition& part);

// Per-level transfer adjacency: level l holds exactly the transfers of rank
// >= l. Level 0 is the full set.
struct TransferOverlays {
  std::uint32_t levels = 0;  // number of stored levels (partition levels + 1)
  std::vector<std::vector<std::uint32_t>> offset;  // per level, num_events + 1
  std::vector<std::vector<EventId>> to;            // per level, targets

  std::size_t size(unsigned level) const { return to[level].size(); }
};

// `levels` is the partition depth; levels 0 through `levels` are stored.
TransferOverlays build_overlays(const Timetable& tt, const TransferSet& ts, unsigned levels);

// Cell-local event search: rides and transfers stay inside `cell` at `level`,
// only transfers of rank >= min_rank are used, and every scanned event whose
// successor leaves the cell is collected as an outgoing border event.
struct CellSearchResult {
  struct Reached {
    EventId obe;
    std::uint32_t trips;  // minimal trip count over journeys reaching it
    bool operator==(const Reached&) const = default;
  };
  std::vector<Reached> reached;  // sorted by event id
  // Transfers of one minimal-trip journey per reached event, in ride order.
  std::vector<std::vector<TransferId>> journeys;
  // Every distinct (event, round) pair scanned, sorted (only filled on
  // request). A pair (e, n) means e lies on a found journey with n trips.
  std::vector<std::pair<EventId, std::uint32_t>> visited;
};

CellSearchResult event_tb(const Timetable& tt, const TransferSet& ts, const NestedPartition& part,
                          unsigned level, CellId cell, EventId source_ibe, Rank min_rank,
                          bool record_visits = false);

// Assigns transfer ranks: for every level l and cell, transfers on
// minimal-trip journeys that cross the cell (incoming border event to
// outgoing border event) are raised to rank l + 1. Resets all ranks first;
// reruns are deterministic for any thread count.
void customize(const Timetable& tt, TransferSet& ts, const NestedPartition& part,
               unsigned threads = 1);

// Copies ranks from `from` onto matching (source event, target event) pairs
// of `to_set`; transfers without a match keep rank 0.
void carry_ranks(const TransferSet& from, TransferSet& to_set);

struct EventTimeEdit {
  EventId event;
  Time arr;
  Time dep;
};

struct UpdateChanges {
  std::vector<EventTimeEdit> edits;  // already applied to the timetable
  const TransferSet* before = nullptr;  // transfer set prior to regeneration
};

enum class UpdateMode { kThorough, kWindowed };

// Repairs ranks after a delay: reruns cell searches, but only for cells that
// contain an affected event at the given level. Thorough mode first clamps
// in-cell ranks down to the level and reproduces a full customization;
// windowed mode only raises ranks and skips searches that cannot interact
// with the affected time window.
void update_ranks(const Timetable& tt, TransferSet& ts, const NestedPartition& part,
                  const UpdateChanges& changes, UpdateMode mode, unsigned threads = 1);

}  // namespace trex
