#include "trex/refkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "trex/util.hpp"

namespace trex {

namespace {

std::vector<StopId> sample_stops(Rng& rng, StopId first, StopId last, std::size_t count) {
  // without replacement from [first, last]
  std::vector<StopId> pool(last - first + 1);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = first + static_cast<StopId>(i);
  std::vector<StopId> out;
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace

Timetable gen_synthetic(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  std::uint32_t clusters = std::max(1u, spec.clusters);
  std::uint32_t stops = std::max(spec.stops, 2 * clusters);

  // contiguous stop blocks per cluster
  std::vector<StopId> cluster_first(clusters + 1);
  for (std::uint32_t c = 0; c <= clusters; ++c)
    cluster_first[c] = static_cast<StopId>(static_cast<std::uint64_t>(stops) * c / clusters);

  std::vector<Stop> stop_list(stops);
  std::uint32_t grid = static_cast<std::uint32_t>(std::ceil(std::sqrt(clusters)));
  for (std::uint32_t c = 0; c < clusters; ++c) {
    double cx = static_cast<double>(c % grid) * 2.0;
    double cy = static_cast<double>(c / grid) * 2.0;
    for (StopId p = cluster_first[c]; p < cluster_first[c + 1]; ++p) {
      stop_list[p].name = "S" + std::to_string(p);
      stop_list[p].lat = cy + static_cast<double>(rng.range(-300, 300)) / 1000.0;
      stop_list[p].lon = cx + static_cast<double>(rng.range(-300, 300)) / 1000.0;
    }
  }

  auto cluster_span = [&](std::uint32_t c, std::size_t want) {
    StopId first = cluster_first[c], last = cluster_first[c + 1] - 1;
    return sample_stops(rng, first, last, std::min<std::size_t>(want, last - first + 1));
  };

  std::vector<RawTrip> trips;
  auto add_line = [&](const std::vector<StopId>& seq) {
    if (seq.size() < 2) return;
    std::uint32_t count = spec.trips_per_line;
    if (count > 1)
      count = static_cast<std::uint32_t>(std::max<std::int64_t>(1, count + rng.range(-1, 1)));
    Time t0 = static_cast<Time>(rng.range(0, std::max<Time>(1, spec.horizon / 2)));
    Time headway = static_cast<Time>(rng.range(600, 3600));
    std::vector<Time> leg(seq.size() - 1), dwell(seq.size());
    for (auto& x : leg) x = static_cast<Time>(rng.range(120, 900));
    for (auto& x : dwell) x = static_cast<Time>(rng.range(0, 120));
    for (std::uint32_t k = 0; k < count; ++k) {
      RawTrip t;
      Time at = t0 + static_cast<Time>(k) * headway;
      for (std::size_t i = 0; i < seq.size(); ++i) {
        t.stops.push_back(seq[i]);
        t.arr.push_back(at);
        t.dep.push_back(at + dwell[i]);
        if (i + 1 < seq.size()) at += dwell[i] + leg[i];
      }
      trips.push_back(std::move(t));
    }
  };

  std::uint32_t lines = clusters == 1 ? std::max(1u, spec.lines)
                                      : std::max(spec.lines, 2 * clusters);
  for (std::uint32_t i = 0; i < lines; ++i) {
    if (i < clusters) {
      // backbone through its cluster
      add_line(cluster_span(i, 4 + rng.below(5)));
    } else if (i < 2 * clusters && clusters > 1) {
      // ring piece joining consecutive clusters
      std::uint32_t a = i - clusters, b = (a + 1) % clusters;
      auto sa = cluster_span(a, 2 + rng.below(3));
      auto sb = cluster_span(b, 2 + rng.below(3));
      sa.insert(sa.end(), sb.begin(), sb.end());
      add_line(sa);
    } else if (clusters > 1 && rng.chance(spec.inter_fraction)) {
      // express link calling only at cluster hubs (first stop of each cluster)
      std::uint32_t a = static_cast<std::uint32_t>(rng.below(clusters));
      std::uint32_t b = (a + 1 + static_cast<std::uint32_t>(rng.below(clusters - 1))) % clusters;
      std::vector<StopId> seq{cluster_first[a], cluster_first[b]};
      if (clusters > 2 && rng.chance(0.4)) {
        std::uint32_t c = (b + 1 + static_cast<std::uint32_t>(rng.below(clusters - 1))) % clusters;
        if (c != a) seq.push_back(cluster_first[c]);
      }
      add_line(seq);
    } else {
      add_line(cluster_span(static_cast<std::uint32_t>(rng.below(clusters)), 3 + rng.below(6)));
    }
  }

  std::vector<RawFootpath> paths;
  for (std::uint32_t c = 0; c < clusters; ++c) {
    StopId first = cluster_first[c], last = cluster_first[c + 1] - 1;
    if (last == first) continue;
    std::size_t cluster_size = last - first + 1;
    std::size_t edges = static_cast<std::size_t>(spec.footpath_density * cluster_size);
    for (std::size_t i = 0; i < edges; ++i) {
      StopId a = first + static_cast<StopId>(rng.below(cluster_size));
      StopId b = first + static_cast<StopId>(rng.below(cluster_size));
      if (a == b) continue;
      paths.push_back({a, b, static_cast<Time>(rng.range(60, 600))});
    }
  }

  // Every stop must end up with service. Walk components that no line serves
  // would become zero-cut islands and derail the unconstrained top-level
  // bisection, so link each one to the nearest served stop.
  std::vector<std::uint32_t> comp(stops);
  for (std::uint32_t i = 0; i < stops; ++i) comp[i] = i;
  auto find = [&](std::uint32_t v) {
    while (comp[v] != v) v = comp[v] = comp[comp[v]];
    return v;
  };
  for (const RawFootpath& p : paths) comp[find(p.from)] = find(p.to);
  std::vector<std::uint8_t> served(stops, 0);
  for (const RawTrip& t : trips)
    for (StopId s : t.stops) served[find(s)] = 1;
  for (StopId p = 0; p < stops; ++p) {
    if (served[find(p)]) continue;
    StopId best = p;
    double best_d2 = 0.0;
    for (StopId q = 0; q < stops; ++q) {
      if (!served[find(q)]) continue;
      double dx = stop_list[p].lat - stop_list[q].lat;
      double dy = stop_list[p].lon - stop_list[q].lon;
      double d2 = dx * dx + dy * dy;
      if (best == p || d2 < best_d2) {
        best = q;
        best_d2 = d2;
      }
    }
    if (best == p) break;  // no service anywhere, nothing to link to
    paths.push_back({p, best, static_cast<Time>(rng.range(120, 600))});
    std::uint32_t a = find(p), b = find(best);
    comp[a] = b;
    served[b] = 1;
  }

  FootpathSet fp = close_footpaths(paths, stops);
  return build_timetable(std::move(stop_list), trips, std::move(fp), spec.horizon);
}

std::vector<FrontEntry> oracle_front(const Timetable& tt, StopId from, StopId to, Time dep,
                                     unsigned max_rounds) {
  const FootpathSet& fp = tt.footpaths;
  std::size_t stops = tt.num_stops();

  // arrive[p]: earliest arrival at p with the current number of trips, having
  // just left a vehicle there (no trailing footpath)
  std::vector<Time> arrive(stops, kInfTime), board(stops, kInfTime);
  for (std::uint32_t i = fp.begin(from); i < fp.end(from); ++i)
    board[fp.target[i]] = dep + fp.duration[i];

  std::vector<FrontEntry> front;
  Time best = kInfTime;
  Time walk = fp.between(from, to);
  if (walk != kInfTime) {
    best = dep + walk;
    front.push_back({best, 0});
  }

  for (unsigned round = 1; round <= max_rounds; ++round) {
    std::vector<Time> next(stops, kInfTime);
    bool any = false;
    for (TripId t = 0; t < tt.num_trips(); ++t) {
      std::uint32_t len = tt.trip_length(t);
      for (std::uint32_t i = 0; i + 1 < len; ++i) {
        EventId e = tt.event_at(t, i);
        if (board[tt.event_stop[e]] == kInfTime || board[tt.event_stop[e]] > tt.dep[e])
          continue;
        for (std::uint32_t j = i + 1; j < len; ++j) {
          EventId x = tt.event_at(t, j);
          StopId p = tt.event_stop[x];
          if (tt.arr[x] < next[p]) {
            next[p] = tt.arr[x];
            any = true;
          }
        }
        break;  // the earliest boardable index covers all later exits
      }
    }
    if (!any) break;
    arrive.swap(next);

    Time at_target = kInfTime;
    for (std::uint32_t i = fp.begin(to); i < fp.end(to); ++i) {
      StopId q = fp.target[i];
      if (arrive[q] != kInfTime)
        at_target = std::min(at_target, arrive[q] + fp.duration[i]);
    }
    if (at_target < best) {
      best = at_target;
      front.push_back({best, round});
    }

    // transfer footpaths for the next round
    board.assign(stops, kInfTime);
    for (StopId p = 0; p < stops; ++p) {
      if (arrive[p] == kInfTime) continue;
      for (std::uint32_t i = fp.begin(p); i < fp.end(p); ++i) {
        StopId q = fp.target[i];
        board[q] = std::min(board[q], arrive[p] + fp.duration[i]);
      }
    }
  }
  return front;
}

std::vector<Time> profile_departures(const Timetable& tt, StopId from, Time start, Time end) {
  const FootpathSet& fp = tt.footpaths;
  std::set<Time, std::greater<Time>> times;
  for (std::uint32_t i = fp.begin(from); i < fp.end(from); ++i) {
    StopId p = fp.target[i];
    Time delta = fp.duration[i];
    for (std::uint32_t o = tt.stop_line_begin[p]; o < tt.stop_line_begin[p + 1]; ++o) {
      const LineStop& ls = tt.stop_lines[o];
      if (ls.index + 1 >= tt.line_length(ls.line)) continue;
      for (std::uint32_t k = 0; k < tt.line_size(ls.line); ++k) {
        EventId e = tt.event_at(tt.line_trip(ls.line, k), ls.index);
        Time at = tt.dep[e] - delta;
        if (at >= start && at <= end) times.insert(at);
      }
    }
  }
  return {times.begin(), times.end()};
}

std::vector<ProfileEntry> oracle_profile(const Timetable& tt, StopId from, StopId to,
                                         Time start, Time end, unsigned max_rounds) {
  std::vector<ProfileEntry> out;
  auto have = [&](Time arrival, std::uint32_t trips) {
    for (const auto& e : out)
      if (e.arrival == arrival && e.trips == trips) return true;
    return false;
  };
  for (Time dep : profile_departures(tt, from, start, end)) {
    for (const auto& f : oracle_front(tt, from, to, dep, max_rounds))
      if (!have(f.arrival, f.trips)) out.push_back({dep, f.arrival, f.trips});
  }
  return out;
}

std::vector<CellReach> oracle_cell_traversal(const Timetable& tt, const TransferSet& ts,
                                             const NestedPartition& part, unsigned level,
                                             CellId cell, EventId source_ibe, Rank min_rank,
                                             unsigned max_rounds) {
  auto in_cell = [&](EventId e) { return part.event_cell_at(e, level) == cell; };

  std::vector<CellReach> reached;
  auto record = [&](EventId obe, std::uint32_t trips) {
    for (auto& r : reached)
      if (r.obe == obe) {
        r.trips = std::min(r.trips, trips);
        return;
      }
    reached.push_back({obe, trips});
  };

  std::set<EventId> frontier = {source_ibe};  // events a trip was entered at
  std::set<EventId> visited = frontier;
  for (unsigned round = 1; round <= max_rounds && !frontier.empty(); ++round) {
    std::set<EventId> next;
    for (EventId enter : frontier) {
      TripId t = tt.trip_of_event(enter);
      std::uint32_t len = tt.trip_length(t);
      std::uint32_t xi = tt.index_in_trip(t, enter);
      // boarding right at the cell exit: the journey leaves without riding
      // an in-cell stop, but it still counts as a traversal
      if (in_cell(enter) && xi + 1 < len && !in_cell(enter + 1)) record(enter, round);
      for (std::uint32_t x = xi + 1; x < len; ++x) {
        EventId e = tt.event_at(t, x);
        if (!in_cell(e)) break;
        bool obe = x + 1 < len && !in_cell(e + 1);
        if (obe) record(e, round);
        for (std::uint32_t i = ts.begin(e); i < ts.end(e); ++i) {
          if (ts.rank[i] < min_rank) continue;
          EventId target = ts.to[i];
          if (in_cell(target) && !visited.count(target)) {
            visited.insert(target);
            next.insert(target);
          }
        }
        if (obe) break;
      }
    }
    frontier.swap(next);
  }
  std::sort(reached.begin(), reached.end(),
            [](const CellReach& a, const CellReach& b) { return a.obe < b.obe; });
  return reached;
}

}  // namespace trex
