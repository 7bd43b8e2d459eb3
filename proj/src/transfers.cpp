#include "trex/transfers.hpp"

#include <algorithm>
#include <unordered_map>

#include "trex/util.hpp"

namespace trex {

bool TransferSet::contains(EventId from, EventId target) const {
  auto lo = to.begin() + begin(from);
  auto hi = to.begin() + end(from);
  return std::binary_search(lo, hi, target);
}

namespace {

// earliest trip of the line enterable at `index` no earlier than `at`;
// kInvalid if even the last trip departs too early
TripId earliest_trip(const Timetable& tt, LineId line, std::uint32_t index, Time at) {
  std::uint32_t lo = 0, hi = tt.line_size(line);
  while (lo < hi) {
    std::uint32_t mid = (lo + hi) / 2;
    if (tt.dep[tt.event_at(tt.line_trip(line, mid), index)] >= at)
      hi = mid;
    else
      lo = mid + 1;
  }
  if (lo == tt.line_size(line)) return kInvalid;
  return tt.line_trip(line, lo);
}

void assemble(const Timetable& tt, TransferSet& ts,
              const std::vector<std::vector<EventId>>& per_event) {
  ts.offset.assign(tt.num_events() + 1, 0);
  std::size_t total = 0;
  for (std::size_t e = 0; e < tt.num_events(); ++e) {
    total += per_event[e].size();
    ts.offset[e + 1] = static_cast<std::uint32_t>(total);
  }
  ts.to.clear();
  ts.to.reserve(total);
  for (std::size_t e = 0; e < tt.num_events(); ++e)
    ts.to.insert(ts.to.end(), per_event[e].begin(), per_event[e].end());
  ts.rank.assign(total, 0);
}

struct Candidate {
  LineId line;
  std::uint32_t index;
  Time ready;
};

}  // namespace

TransferSet generate_transfers(const Timetable& tt, unsigned threads) {
  std::vector<std::vector<EventId>> out(tt.num_events());

  parallel_for(tt.num_trips(), threads, [&](std::size_t t_begin, std::size_t t_end) {
    // per target line, over the exits processed so far: smallest trip
    // position generated into each boarding index
    std::unordered_map<LineId, std::vector<std::uint32_t>> generated;
    std::vector<Candidate> cand;
    for (TripId t = static_cast<TripId>(t_begin); t < t_end; ++t) {
      generated.clear();
      for (std::uint32_t j = tt.trip_length(t) - 1; j >= 1; --j) {
        EventId e = tt.event_at(t, j);
        StopId p = tt.event_stop[e];
        cand.clear();
        for (std::uint32_t f = tt.footpaths.begin(p); f < tt.footpaths.end(p); ++f) {
          StopId q = tt.footpaths.target[f];
          Time ready = tt.arr[e] + tt.footpaths.duration[f];
          for (std::uint32_t o = tt.stop_line_begin[q]; o < tt.stop_line_begin[q + 1]; ++o) {
            const LineStop& ls = tt.stop_lines[o];
            if (ls.index + 1 >= tt.line_length(ls.line)) continue;
            cand.push_back({ls.line, ls.index, ready});
          }
        }
        std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
          return std::make_pair(a.line, a.index) < std::make_pair(b.line, b.index);
        });

        auto& row = out[e];
        for (const Candidate& c : cand) {
          TripId tb = earliest_trip(tt, c.line, c.index, c.ready);
          if (tb == kInvalid) continue;
          if (c.line == tt.trip_line[t] && tt.trip_pos[t] <= tt.trip_pos[tb] && j <= c.index)
            continue;  // staying seated reaches everything this would
          auto git = generated.find(c.line);
          if (git != generated.end()) {
            // skip if a later-or-equal exit already boards an earlier-or-equal
            // trip of this line at an earlier-or-equal index
            std::uint32_t best = kInvalid;
            for (std::uint32_t i = 0; i <= c.index; ++i)
              best = std::min(best, git->second[i]);
            if (best <= tt.trip_pos[tb]) continue;
          }
          row.push_back(tt.event_at(tb, c.index));
          auto& slots = generated[c.line];
          if (slots.empty()) slots.assign(tt.line_length(c.line), kInvalid);
          slots[c.index] = std::min(slots[c.index], tt.trip_pos[tb]);
        }
        std::sort(row.begin(), row.end());
      }
    }
  });

  TransferSet ts;
  assemble(tt, ts, out);
  return ts;
}

void prune_uturn(const Timetable& tt, TransferSet& ts, unsigned threads) {
  std::vector<std::vector<EventId>> keep(tt.num_events());

  parallel_for(tt.num_trips(), threads, [&](std::size_t t_begin, std::size_t t_end) {
    for (TripId t = static_cast<TripId>(t_begin); t < t_end; ++t) {
      for (std::uint32_t j = 1; j < tt.trip_length(t); ++j) {
        EventId e = tt.event_at(t, j);
        auto& row = keep[e];
        for (std::uint32_t i = ts.begin(e); i < ts.end(e); ++i) {
          EventId target = ts.to[i];
          TripId tb = tt.trip_of_event(target);
          std::uint32_t ti = tt.index_in_trip(tb, target);
          bool drop = ti + 1 < tt.trip_length(tb) &&
                      tt.event_stop[tt.event_at(t, j - 1)] == tt.event_stop[target + 1] &&
                      ts.contains(e - 1, target + 1);
          if (!drop) row.push_back(target);
        }
      }
    }
  });

  assemble(tt, ts, keep);
}

void prune_latest_exit(const Timetable& tt, TransferSet& ts, unsigned threads) {
  std::vector<std::vector<EventId>> keep(tt.num_events());

  parallel_for(tt.num_trips(), threads, [&](std::size_t t_begin, std::size_t t_end) {
    std::unordered_map<StopId, Time> best;  // earliest known arrival per stop
    for (TripId t = static_cast<TripId>(t_begin); t < t_end; ++t) {
      best.clear();
      auto improve = [&](StopId p, Time at) {
        auto [it, fresh] = best.try_emplace(p, at);
        if (fresh) return true;
        if (at < it->second) {
          it->second = at;
          return true;
        }
        return false;
      };
      // Sweep the exits backwards. A transfer survives only if riding its
      // target trip improves the best known arrival somewhere; the best known
      // arrivals come from staying seated longer and from transfers already
      // kept at later exits. Discarded transfers never touch the labels, so
      // a second sweep reproduces the same decisions.
      for (std::uint32_t j = tt.trip_length(t) - 1; j >= 1; --j) {
        EventId e = tt.event_at(t, j);
        StopId p = tt.event_stop[e];
        improve(p, tt.arr[e]);
        for (std::uint32_t f = tt.footpaths.begin(p); f < tt.footpaths.end(p); ++f)
          improve(tt.footpaths.target[f], tt.arr[e] + tt.footpaths.duration[f]);
        auto& row = keep[e];
        for (std::uint32_t i = ts.begin(e); i < ts.end(e); ++i) {
          EventId target = ts.to[i];
          TripId tb = tt.trip_of_event(target);
          std::uint32_t len = tt.trip_length(tb);
          bool useful = false;
          for (std::uint32_t l = tt.index_in_trip(tb, target) + 1; l < len; ++l) {
            EventId x = tt.event_at(tb, l);
            StopId q = tt.event_stop[x];
            if (improve(q, tt.arr[x])) useful = true;
            for (std::uint32_t f = tt.footpaths.begin(q); f < tt.footpaths.end(q); ++f)
              if (improve(tt.footpaths.target[f], tt.arr[x] + tt.footpaths.duration[f]))
                useful = true;
          }
          if (useful) row.push_back(target);
        }
        std::sort(row.begin(), row.end());
      }
    }
  });

  assemble(tt, ts, keep);
}

}  // namespace trex
