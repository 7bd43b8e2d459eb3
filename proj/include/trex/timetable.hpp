#pragma once

#include <string>
#include <vector>

#include "types.hpp"

/* A timetable consists of stops, footpaths, trips and lines.
 *
 * A trip is a sequence of stop events; each event has an arrival and a
 * departure time at a stop, with arr <= dep, and consecutive events satisfy
 * dep[i] <= arr[i+1]. Events of a trip occupy a contiguous id range, so an
 * event is addressed either by its global id or by (trip, index).
 *
 * Trips with identical stop sequences that do not overtake each other are
 * grouped into lines. Within a line, trips are totally ordered: each trip
 * arrives and departs strictly later than its predecessor at every index.
 * Trip ids are assigned so that the trips of a line are consecutive and in
 * line order, which makes "all later trips of this line" a simple id range.
 *
 * Footpaths are symmetric, transitively closed under min-plus, satisfy the
 * triangle inequality and include a zero-length loop at every stop. The rows
 * of a source stop are contiguous and sorted by target stop.
 */

namespace trex {

struct Stop {
  std::string name;
  double lat = 0.0;
  double lon = 0.0;
};

struct FootpathSet {
  std::vector<std::uint32_t> offset;  // size |stops|+1
  std::vector<StopId> target;
  std::vector<Time> duration;

  std::uint32_t begin(StopId p) const { return offset[p]; }
  std::uint32_t end(StopId p) const { return offset[p + 1]; }
  std::size_t size() const { return target.size(); }
  Time between(StopId p, StopId q) const;  // kInfTime if no footpath exists
};

struct LineStop {  // one occurrence of a line at a stop
  LineId line;
  std::uint32_t index;
};

struct Timetable {
  std::vector<Stop> stops;
  FootpathSet footpaths;

  std::vector<Time> arr, dep;        // per event
  std::vector<StopId> event_stop;    // per event
  std::vector<EventId> trip_begin;   // size |trips|+1
  std::vector<LineId> trip_line;     // per trip
  std::vector<std::uint32_t> trip_pos;  // position of the trip within its line

  std::vector<std::uint32_t> line_begin;       // size |lines|+1, into line_trips
  std::vector<TripId> line_trips;              // in line order
  std::vector<std::uint32_t> line_stop_begin;  // size |lines|+1, into line_stops
  std::vector<StopId> line_stops;

  std::vector<std::uint32_t> stop_line_begin;  // size |stops|+1, into stop_lines
  std::vector<LineStop> stop_lines;  // occurrences, sorted by (line, index)

  Time period = 0;

  std::size_t num_stops() const { return stops.size(); }
  std::size_t num_trips() const { return trip_begin.empty() ? 0 : trip_begin.size() - 1; }
  std::size_t num_lines() const { return line_begin.empty() ? 0 : line_begin.size() - 1; }
  std::size_t num_events() const { return arr.size(); }

  std::uint32_t trip_length(TripId t) const { return trip_begin[t + 1] - trip_begin[t]; }
  EventId event_at(TripId t, std::uint32_t i) const { return trip_begin[t] + i; }
  TripId trip_of_event(EventId e) const;
  std::uint32_t index_in_trip(TripId t, EventId e) const { return e - trip_begin[t]; }

  std::uint32_t line_size(LineId l) const { return line_begin[l + 1] - line_begin[l]; }
  TripId line_trip(LineId l, std::uint32_t k) const { return line_trips[line_begin[l] + k]; }
  std::uint32_t line_length(LineId l) const {
    return line_stop_begin[l + 1] - line_stop_begin[l];
  }
  StopId line_stop(LineId l, std::uint32_t i) const {
    return line_stops[line_stop_begin[l] + i];
  }
};

struct RawFootpath {
  StopId from, to;
  Time duration;
};

struct RawTrip {
  std::vector<StopId> stops;
  std::vector<Time> arr, dep;
};

// Symmetrizes, adds self loops and computes the min-plus closure per connected
// component. Components larger than component_cap raise an error that names a
// stop of the offending component.
FootpathSet close_footpaths(const std::vector<RawFootpath>& paths, std::size_t num_stops,
                            std::size_t component_cap = 300);

// Groups raw trips into lines and assembles the flattened layout.
Timetable build_timetable(std::vector<Stop> stops, const std::vector<RawTrip>& trips,
                          FootpathSet footpaths, Time period);

// Subtracts the buffer from every departure time, flooring at the arrival.
void apply_buffer_time(Timetable& tt, Time buffer);

// Throws std::runtime_error when a structural invariant is violated.
void validate(const Timetable& tt);

struct GtfsOptions {
  std::string dir;
  std::string service_day;  // YYYYMMDD or YYYY-MM-DD
  int day_count = 1;        // 1 or 2
  Time buffer = 0;
};

Timetable load_gtfs(const GtfsOptions& opt);

}  // namespace trex
