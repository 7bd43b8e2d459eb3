#include "trex/timetable.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace trex {

Time FootpathSet::between(StopId p, StopId q) const {
  auto lo = target.begin() + begin(p);
  auto hi = target.begin() + end(p);
  auto it = std::lower_bound(lo, hi, q);
  if (it == hi || *it != q) return kInfTime;
  return duration[static_cast<std::size_t>(it - target.begin())];
}

TripId Timetable::trip_of_event(EventId e) const {
  auto it = std::upper_bound(trip_begin.begin(), trip_begin.end(), e);
  return static_cast<TripId>(it - trip_begin.begin() - 1);
}

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

FootpathSet close_footpaths(const std::vector<RawFootpath>& paths, std::size_t num_stops,
                            std::size_t component_cap) {
  for (const auto& f : paths) {
    if (f.from >= num_stops || f.to >= num_stops)
      throw std::runtime_error("footpath endpoint out of range");
    if (f.duration < 0) throw std::runtime_error("negative footpath duration");
  }

  UnionFind uf(num_stops);
  for (const auto& f : paths) uf.unite(f.from, f.to);

  std::vector<std::vector<StopId>> members(num_stops);
  for (StopId p = 0; p < num_stops; ++p) members[uf.find(p)].push_back(p);

  for (StopId root = 0; root < num_stops; ++root) {
    if (members[root].size() > component_cap)
      throw std::runtime_error("footpath component around stop " + std::to_string(root) +
                               " has " + std::to_string(members[root].size()) +
                               " stops, exceeding the cap of " +
                               std::to_string(component_cap));
  }

  // per-component dense index
  std::vector<std::uint32_t> local(num_stops, 0);
  for (StopId root = 0; root < num_stops; ++root)
    for (std::uint32_t i = 0; i < members[root].size(); ++i)
      local[members[root][i]] = i;

  std::vector<std::vector<std::int64_t>> dist;  // reused per component
  std::vector<std::pair<StopId, Time>> row;
  FootpathSet out;
  out.offset.assign(num_stops + 1, 0);

  std::vector<std::vector<std::pair<StopId, Time>>> rows(num_stops);
  for (StopId root = 0; root < num_stops; ++root) {
    const auto& comp = members[root];
    if (comp.empty()) continue;
    std::size_t n = comp.size();
    dist.assign(n, std::vector<std::int64_t>(n, kInfTime));
    for (std::size_t i = 0; i < n; ++i) dist[i][i] = 0;
    for (const auto& f : paths) {
      if (uf.find(f.from) != root) continue;
      std::uint32_t a = local[f.from], b = local[f.to];
      std::int64_t d = f.duration;
      dist[a][b] = std::min(dist[a][b], d);
      dist[b][a] = std::min(dist[b][a], d);
    }
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i) {
        if (dist[i][k] >= kInfTime) continue;
        for (std::size_t j = 0; j < n; ++j) {
          std::int64_t via = dist[i][k] + dist[k][j];
          if (via < dist[i][j]) dist[i][j] = via;
        }
      }
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = rows[comp[i]];
      for (std::size_t j = 0; j < n; ++j)
        if (dist[i][j] < kInfTime) r.emplace_back(comp[j], static_cast<Time>(dist[i][j]));
      std::sort(r.begin(), r.end());
    }
  }

  for (StopId p = 0; p < num_stops; ++p) {
    out.offset[p + 1] = out.offset[p] + static_cast<std::uint32_t>(rows[p].size());
    for (const auto& [q, d] : rows[p]) {
      out.target.push_back(q);
      out.duration.push_back(d);
    }
  }
  return out;
}

namespace {

// grouping key: trips with the same stop sequence are candidates for a line
struct TripRef {
  const RawTrip* trip;
  std::uint32_t input_pos;
};

bool strictly_later(const RawTrip& a, const RawTrip& b) {
  // b after a at every index, in both arrival and departure
  for (std::size_t i = 0; i < a.stops.size(); ++i)
    if (b.arr[i] <= a.arr[i] || b.dep[i] <= a.dep[i]) return false;
  return true;
}

}  // namespace

Timetable build_timetable(std::vector<Stop> stops, const std::vector<RawTrip>& trips,
                          FootpathSet footpaths, Time period) {
  for (const auto& t : trips) {
    if (t.stops.size() < 2) throw std::runtime_error("trip with fewer than two events");
    if (t.arr.size() != t.stops.size() || t.dep.size() != t.stops.size())
      throw std::runtime_error("trip time vectors do not match its stop sequence");
    for (std::size_t i = 0; i < t.stops.size(); ++i) {
      if (t.stops[i] >= stops.size()) throw std::runtime_error("trip stop out of range");
      if (t.arr[i] > t.dep[i]) throw std::runtime_error("event departs before it arrives");
      if (i + 1 < t.stops.size() && t.dep[i] > t.arr[i + 1])
        throw std::runtime_error("trip events are not time ordered");
    }
  }

  std::vector<TripRef> order(trips.size());
  for (std::uint32_t i = 0; i < trips.size(); ++i) order[i] = {&trips[i], i};
  std::stable_sort(order.begin(), order.end(), [](const TripRef& a, const TripRef& b) {
    if (a.trip->stops != b.trip->stops) return a.trip->stops < b.trip->stops;
    if (a.trip->dep != b.trip->dep) return a.trip->dep < b.trip->dep;
    return a.trip->arr < b.trip->arr;
  });

  // greedy grouping: append each trip to the first line with the same stop
  // sequence whose last trip it strictly follows
  std::vector<std::vector<const RawTrip*>> lines;
  std::map<std::vector<StopId>, std::vector<std::uint32_t>> lines_of_seq;
  for (const auto& ref : order) {
    auto& candidates = lines_of_seq[ref.trip->stops];
    bool placed = false;
    for (std::uint32_t l : candidates) {
      if (strictly_later(*lines[l].back(), *ref.trip)) {
        lines[l].push_back(ref.trip);
        placed = true;
        break;
      }
    }
    if (!placed) {
      candidates.push_back(static_cast<std::uint32_t>(lines.size()));
      lines.push_back({ref.trip});
    }
  }

  Timetable tt;
  tt.stops = std::move(stops);
  tt.footpaths = std::move(footpaths);
  tt.period = period;

  std::size_t num_trips = trips.size();
  tt.trip_begin.reserve(num_trips + 1);
  tt.trip_begin.push_back(0);
  tt.line_begin.reserve(lines.size() + 1);
  tt.line_begin.push_back(0);
  tt.line_stop_begin.reserve(lines.size() + 1);
  tt.line_stop_begin.push_back(0);

  for (std::uint32_t l = 0; l < lines.size(); ++l) {
    const auto& seq = lines[l][0]->stops;
    tt.line_stops.insert(tt.line_stops.end(), seq.begin(), seq.end());
    tt.line_stop_begin.push_back(static_cast<std::uint32_t>(tt.line_stops.size()));
    for (std::uint32_t k = 0; k < lines[l].size(); ++k) {
      const RawTrip& t = *lines[l][k];
      TripId id = static_cast<TripId>(tt.trip_line.size());
      tt.line_trips.push_back(id);
      tt.trip_line.push_back(l);
      tt.trip_pos.push_back(k);
      for (std::size_t i = 0; i < t.stops.size(); ++i) {
        tt.arr.push_back(t.arr[i]);
        tt.dep.push_back(t.dep[i]);
        tt.event_stop.push_back(t.stops[i]);
      }
      tt.trip_begin.push_back(static_cast<EventId>(tt.arr.size()));
    }
    tt.line_begin.push_back(static_cast<std::uint32_t>(tt.line_trips.size()));
  }

  std::vector<std::vector<LineStop>> at_stop(tt.stops.size());
  for (std::uint32_t l = 0; l < lines.size(); ++l)
    for (std::uint32_t i = 0; i < tt.line_length(l); ++i)
      at_stop[tt.line_stop(l, i)].push_back({l, i});

  tt.stop_line_begin.assign(tt.stops.size() + 1, 0);
  for (StopId p = 0; p < tt.stops.size(); ++p) {
    tt.stop_line_begin[p + 1] =
        tt.stop_line_begin[p] + static_cast<std::uint32_t>(at_stop[p].size());
    tt.stop_lines.insert(tt.stop_lines.end(), at_stop[p].begin(), at_stop[p].end());
  }
  return tt;
}

void apply_buffer_time(Timetable& tt, Time buffer) {
  if (buffer < 0) throw std::runtime_error("negative buffer time");
  for (std::size_t e = 0; e < tt.num_events(); ++e)
    tt.dep[e] = std::max(tt.arr[e], tt.dep[e] - buffer);
}

void validate(const Timetable& tt) {
  auto fail = [](const std::string& what) { throw std::runtime_error("timetable: " + what); };

  std::size_t s = tt.num_stops();
  const FootpathSet& fp = tt.footpaths;
  if (fp.offset.size() != s + 1) fail("footpath offset table has wrong size");
  if (fp.target.size() != fp.duration.size()) fail("footpath arrays disagree");
  for (StopId p = 0; p < s; ++p) {
    if (fp.begin(p) > fp.end(p) || fp.end(p) > fp.size()) fail("footpath offsets not monotone");
    bool self = false;
    for (std::uint32_t i = fp.begin(p); i < fp.end(p); ++i) {
      if (i > fp.begin(p) && fp.target[i - 1] >= fp.target[i])
        fail("footpath row not sorted by target");
      if (fp.duration[i] < 0) fail("negative footpath duration");
      if (fp.target[i] == p) {
        if (fp.duration[i] != 0) fail("self loop with nonzero duration");
        self = true;
      }
      if (fp.between(fp.target[i], p) != fp.duration[i]) fail("footpaths not symmetric");
    }
    if (!self) fail("missing self loop");
  }
  for (StopId p = 0; p < s; ++p)
    for (std::uint32_t i = fp.begin(p); i < fp.end(p); ++i) {
      StopId q = fp.target[i];
      for (std::uint32_t j = fp.begin(q); j < fp.end(q); ++j) {
        StopId r = fp.target[j];
        Time direct = fp.between(p, r);
        if (direct == kInfTime) fail("footpaths not transitively closed");
        if (static_cast<std::int64_t>(fp.duration[i]) + fp.duration[j] < direct)
          fail("footpath triangle inequality violated");
      }
    }

  if (tt.trip_begin.empty() || tt.trip_begin.front() != 0 ||
      tt.trip_begin.back() != tt.num_events())
    fail("trip offsets do not cover the events");
  for (TripId t = 0; t < tt.num_trips(); ++t) {
    if (tt.trip_length(t) < 2) fail("trip with fewer than two events");
    for (std::uint32_t i = 0; i < tt.trip_length(t); ++i) {
      EventId e = tt.event_at(t, i);
      if (tt.event_stop[e] >= s) fail("event stop out of range");
      if (tt.arr[e] > tt.dep[e]) fail("event departs before it arrives");
      if (i + 1 < tt.trip_length(t) && tt.dep[e] > tt.arr[e + 1])
        fail("trip events are not time ordered");
    }
  }

  if (tt.line_begin.empty() || tt.line_begin.back() != tt.num_trips())
    fail("line offsets do not cover the trips");
  std::vector<bool> seen(tt.num_trips(), false);
  for (LineId l = 0; l < tt.num_lines(); ++l) {
    if (tt.line_size(l) == 0) fail("empty line");
    for (std::uint32_t k = 0; k < tt.line_size(l); ++k) {
      TripId t = tt.line_trip(l, k);
      if (t >= tt.num_trips() || seen[t]) fail("line trip list is not a partition");
      seen[t] = true;
      if (tt.trip_line[t] != l || tt.trip_pos[t] != k) fail("trip line back references broken");
      if (tt.trip_length(t) != tt.line_length(l)) fail("trip length differs from its line");
      for (std::uint32_t i = 0; i < tt.trip_length(t); ++i)
        if (tt.event_stop[tt.event_at(t, i)] != tt.line_stop(l, i))
          fail("trip stops differ from its line");
      if (k > 0) {
        TripId prev = tt.line_trip(l, k - 1);
        if (prev + 1 != t) fail("line trips not contiguous in id space");
        for (std::uint32_t i = 0; i < tt.trip_length(t); ++i) {
          EventId a = tt.event_at(prev, i), b = tt.event_at(t, i);
          if (tt.arr[b] <= tt.arr[a] || tt.dep[b] <= tt.dep[a])
            fail("line trips are not totally ordered");
        }
      }
    }
  }
  for (TripId t = 0; t < tt.num_trips(); ++t)
    if (!seen[t]) fail("trip missing from every line");

  if (tt.stop_line_begin.size() != s + 1 || tt.stop_line_begin.back() != tt.stop_lines.size())
    fail("stop occurrence offsets broken");
  std::size_t expect = 0;
  for (LineId l = 0; l < tt.num_lines(); ++l) expect += tt.line_length(l);
  if (tt.stop_lines.size() != expect) fail("stop occurrence list incomplete");
  for (StopId p = 0; p < s; ++p)
    for (std::uint32_t i = tt.stop_line_begin[p]; i < tt.stop_line_begin[p + 1]; ++i) {
      const LineStop& ls = tt.stop_lines[i];
      if (ls.line >= tt.num_lines() || ls.index >= tt.line_length(ls.line) ||
          tt.line_stop(ls.line, ls.index) != p)
        fail("stop occurrence entry wrong");
      if (i > tt.stop_line_begin[p]) {
        const LineStop& prev = tt.stop_lines[i - 1];
        if (std::make_pair(prev.line, prev.index) >= std::make_pair(ls.line, ls.index))
          fail("stop occurrences not sorted");
      }
    }
}

}  // namespace trex
