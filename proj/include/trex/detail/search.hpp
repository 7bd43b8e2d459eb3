#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "trex/timetable.hpp"
#include "trex/types.hpp"

namespace trex::detail {

// Reached indices with lazy per-query invalidation. A stored value is only
// valid when its stamp matches the current query; the stamp space wraps every
// 65536 queries, at which point everything is cleared for real.
struct ReachedStore {
  std::vector<std::uint8_t> r;
  std::vector<std::uint16_t> stamp;
  std::uint16_t now = 0;

  void init(std::size_t trips) {
    r.assign(trips, 0);
    stamp.assign(trips, 0);
    now = 0;
  }
  void next_query() {
    if (now == std::numeric_limits<std::uint16_t>::max()) {
      std::fill(stamp.begin(), stamp.end(), 0);
      now = 1;
    } else {
      ++now;
    }
  }
  std::uint32_t get(TripId t, std::uint32_t len) const {
    return stamp[t] == now ? r[t] : len;
  }
  void set(TripId t, std::uint32_t v) {
    stamp[t] = now;
    r[t] = static_cast<std::uint8_t>(v);
  }
};

struct Segment {
  TripId trip;
  std::uint16_t entry;  // index the trip was entered at; exits start one later
  std::uint16_t end;    // last exit index, inclusive
  std::uint8_t level;   // relevant level at the entered stop (overlay queries)
  std::uint32_t parent;  // position in the previous round, kInvalid for roots
};

// Pushes the segment for entering `trip` at index `entry`. `cut` bounds the
// ride (last index that may be scanned); the reached index only drops when
// the scanned range connects to the already covered tail, otherwise the
// uncovered gap would be claimed as seen. Unlike the query-side enqueue this
// leaves later trips of the line alone: callers collect events of specific
// trips, and riding an earlier trip does not cover a later trip's events.
inline bool enqueue(const Timetable& tt, ReachedStore& reached, std::vector<Segment>& out,
                    TripId trip, std::uint32_t entry, std::uint32_t cut, std::uint8_t level,
                    std::uint32_t parent) {
  std::uint32_t len = tt.trip_length(trip);
  std::uint32_t r = reached.get(trip, len);
  if (r <= entry + 1) return false;
  std::uint32_t end = std::min(r - 1, cut);
  bool pushed = false;
  if (entry + 1 <= end) {
    out.push_back({trip, static_cast<std::uint16_t>(entry), static_cast<std::uint16_t>(end),
                   level, parent});
    pushed = true;
  }
  if (cut >= r - 1) reached.set(trip, entry + 1);
  return pushed;
}

inline constexpr unsigned kMaxRounds = 16;
inline constexpr std::uint32_t kMaxTripEvents = 254;

// Reached indices stratified by round, for the query engines. A single index
// per trip is enough for one fixed query, but profile queries keep the store
// across runs with descending departures, and an earlier departure may reach
// a trip both earlier in the trip and with fewer rides than any previous run.
// Per-round indices (with suffix updates, so round n sees every update of
// rounds <= n) behave exactly like a single index within one run and stay
// exact across runs.
struct RoundReachedStore {
  std::vector<std::uint8_t> r;       // kMaxRounds entries per trip
  std::vector<std::uint16_t> stamp;  // per trip
  std::uint16_t now = 0;

  void init(std::size_t trips) {
    r.assign(trips * kMaxRounds, 0);
    stamp.assign(trips, 0);
    now = 0;
  }
  void next_query() {
    if (now == std::numeric_limits<std::uint16_t>::max()) {
      std::fill(stamp.begin(), stamp.end(), 0);
      now = 1;
    } else {
      ++now;
    }
  }
  std::uint32_t get(TripId t, unsigned round, std::uint32_t len) const {
    return stamp[t] == now ? r[t * kMaxRounds + (round - 1)] : len;
  }
  void set_suffix(TripId t, unsigned round, std::uint32_t v, std::uint32_t len) {
    std::uint8_t* row = r.data() + static_cast<std::size_t>(t) * kMaxRounds;
    if (stamp[t] != now) {
      std::fill(row, row + kMaxRounds, static_cast<std::uint8_t>(len));
      stamp[t] = now;
    }
    for (unsigned n = round - 1; n < kMaxRounds; ++n)
      row[n] = std::min(row[n], static_cast<std::uint8_t>(v));
  }
};

// Query-engine enqueue: like `enqueue` but without a ride cut, against the
// round-stratified store. `round` is the round of the pushed segment.
inline bool enqueue_round(const Timetable& tt, RoundReachedStore& reached,
                          std::vector<Segment>& out, unsigned round, TripId trip,
                          std::uint32_t entry, std::uint8_t level, std::uint32_t parent) {
  std::uint32_t len = tt.trip_length(trip);
  std::uint32_t r = reached.get(trip, round, len);
  if (r <= entry + 1) return false;
  out.push_back({trip, static_cast<std::uint16_t>(entry), static_cast<std::uint16_t>(r - 1),
                 level, parent});
  LineId line = tt.trip_line[trip];
  TripId last = tt.line_trip(line, tt.line_size(line) - 1);
  for (TripId t2 = trip; t2 <= last; ++t2) {
    if (reached.get(t2, round, len) <= entry + 1) break;
    reached.set_suffix(t2, round, entry + 1, len);
  }
  return true;
}

}  // namespace trex::detail
