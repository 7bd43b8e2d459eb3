#include "trex/customize.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "trex/detail/search.hpp"
#include "trex/util.hpp"

namespace trex {

namespace {

using detail::Segment;

// Last index of a ride entered at `entry` that stays inside `cell`; `entry`
// itself when even the first successor stop lies outside.
std::uint32_t cell_cut(const Timetable& tt, const NestedPartition& part, unsigned level,
                       CellId cell, TripId trip, std::uint32_t entry) {
  std::uint32_t len = tt.trip_length(trip);
  EventId base = tt.trip_begin[trip];
  std::uint32_t x = entry;
  while (x + 1 < len && part.event_cell_at(base + x + 1, level) == cell) ++x;
  return x;
}

void check_trip_lengths(const Timetable& tt) {
  for (TripId t = 0; t < tt.num_trips(); ++t)
    if (tt.trip_length(t) > detail::kMaxTripEvents)
      throw std::runtime_error("trip " + std::to_string(t) + " has " +
                               std::to_string(tt.trip_length(t)) +
                               " events; trips are capped at 254 events");
}

// One cell-local search instance. Reusable across runs; per-event bookkeeping
// is invalidated by stamping, not by clearing.
class CellRunner {
 public:
  CellRunner(const Timetable& tt, const TransferSet& ts, const NestedPartition& part)
      : tt_(tt), ts_(ts), part_(part) {
    reached_.init(tt.num_trips());
    scan_stamp_.assign(tt.num_events(), 0);
    scan_mask_.assign(tt.num_events(), 0);
    walk_stamp_.assign(tt.num_events(), 0);
    walk_mask_.assign(tt.num_events(), 0);
    rounds_.resize(detail::kMaxRounds + 1);
  }

  // A found cell exit. `via` == kInvalid: the exit event was scanned by the
  // segment rounds_[round][pos]. Otherwise the journey boarded the exit event
  // itself through transfer `via`, relaxed while scanning rounds_[round-1][pos].
  struct Hit {
    EventId obe;
    std::uint32_t round;
    std::uint32_t pos;
    TransferId via;
  };

  const std::vector<Hit>& hits() const { return hits_; }
  const std::vector<std::pair<EventId, std::uint32_t>>& visits() const { return visits_; }

  void run(unsigned level, CellId cell, EventId source, Rank min_rank, bool record_visits) {
    reached_.next_query();
    if (run_now_ == std::numeric_limits<std::uint16_t>::max()) {
      std::fill(scan_stamp_.begin(), scan_stamp_.end(), 0);
      std::fill(walk_stamp_.begin(), walk_stamp_.end(), 0);
      run_now_ = 1;
    } else {
      ++run_now_;
    }
    for (auto& r : rounds_) r.clear();
    hits_.clear();
    visits_.clear();
    relaxed_.clear();
    level_ = level;
    cell_ = cell;
    min_rank_ = min_rank;

    TripId t = tt_.trip_of_event(source);
    enqueue_into(1, t, tt_.index_in_trip(t, source), kInvalid);
    for (unsigned n = 1; n <= detail::kMaxRounds; ++n) {
      auto& q = rounds_[n];
      if (q.empty()) break;
      std::uint16_t round_bit = static_cast<std::uint16_t>(1u << (n - 1));
      for (std::uint32_t pos = 0; pos < q.size(); ++pos) {
        Segment seg = q[pos];
        EventId base = tt_.trip_begin[seg.trip];
        std::uint32_t len = tt_.trip_length(seg.trip);
        for (std::uint32_t x = seg.entry + 1; x <= seg.end; ++x) {
          EventId e = base + x;
          // rides cut at the cell boundary leave the reached index alone, so
          // later boardings rescan the trip; a repeat at the same round only
          // duplicates what the first scan already did
          if (scan_stamp_[e] != run_now_) {
            scan_stamp_[e] = run_now_;
            scan_mask_[e] = 0;
          } else if (scan_mask_[e] & round_bit) {
            continue;
          }
          scan_mask_[e] |= round_bit;
          if (record_visits) visits_.push_back({e, n});
          if (x + 1 < len && part_.event_cell_at(e + 1, level_) != cell_)
            hits_.push_back({e, n, pos, kInvalid});
          if (n == detail::kMaxRounds) continue;
          for (std::uint32_t k = ts_.begin(e); k < ts_.end(e); ++k) {
            if (ts_.rank[k] < min_rank_) continue;
            EventId target = ts_.to[k];
            if (part_.event_cell_at(target, level_) != cell_) continue;
            relaxed_.push_back({k, e, n + 1});
            TripId t2 = tt_.trip_of_event(target);
            std::uint32_t ti = tt_.index_in_trip(t2, target);
            if (ti + 1 < tt_.trip_length(t2) &&
                part_.event_cell_at(target + 1, level_) != cell_)
              hits_.push_back({target, n + 1, pos, k});
            enqueue_into(n + 1, t2, ti, pos);
          }
        }
      }
    }
  }

  // One hit per exit event, minimal trip count, in event order. Ties prefer
  // exits scanned while riding over exits boarded directly.
  std::vector<Hit> best_hits() const {
    std::map<EventId, Hit> best;
    for (const auto& h : hits_) {
      auto [it, fresh] = best.try_emplace(h.obe, h);
      if (fresh) continue;
      Hit& b = it->second;
      if (h.round < b.round || (h.round == b.round && b.via != kInvalid && h.via == kInvalid))
        b = h;
    }
    std::vector<Hit> out;
    out.reserve(best.size());
    for (auto& [e, h] : best) out.push_back(h);
    return out;
  }

  // Raises to `to_rank` every transfer of every minimal-trip-count journey to
  // every found exit. All tied journeys are covered, not just one per exit:
  // a query may hand back any of them, and each must stay available on the
  // next level. Legs are rediscovered from the relaxation log, so boardings
  // that the reached-index rule discarded as duplicates still count.
  void rank_all(std::vector<Rank>& rank, Rank to_rank) {
    if (hits_.empty()) return;
    by_target_.resize(relaxed_.size());
    for (std::uint32_t i = 0; i < by_target_.size(); ++i) by_target_[i] = i;
    std::sort(by_target_.begin(), by_target_.end(), [&](std::uint32_t a, std::uint32_t b) {
      return ts_.to[relaxed_[a].id] < ts_.to[relaxed_[b].id];
    });

    // legs waiting to be walked, as (scanned event, round of its leg); one
    // event can carry legs of several rounds when the trip was rescanned
    std::vector<std::pair<EventId, std::uint32_t>> stack;
    auto push_walk = [&](EventId e, std::uint32_t round) {
      std::uint16_t bit = static_cast<std::uint16_t>(1u << (round - 1));
      if (scan_stamp_[e] != run_now_ || !(scan_mask_[e] & bit)) return;
      if (walk_stamp_[e] != run_now_) {
        walk_stamp_[e] = run_now_;
        walk_mask_[e] = 0;
      }
      if (walk_mask_[e] & bit) return;
      walk_mask_[e] |= bit;
      stack.push_back({e, round});
    };
    auto mark_boardings = [&](EventId board, std::uint32_t round) {
      auto lo = std::lower_bound(
          by_target_.begin(), by_target_.end(), board,
          [&](std::uint32_t a, EventId b) { return ts_.to[relaxed_[a].id] < b; });
      for (auto it = lo; it != by_target_.end() && ts_.to[relaxed_[*it].id] == board; ++it) {
        const Relax& rec = relaxed_[*it];
        if (rec.round != round) continue;
        if (rank[rec.id] < to_rank) rank[rec.id] = to_rank;
        if (round >= 3) push_walk(rec.src, round - 1);
      }
    };

    for (const auto& h : best_hits()) {
      if (h.round == 1) continue;  // rode the entering trip straight out
      mark_boardings(h.obe, h.round);
      push_walk(h.obe, h.round);
    }
    while (!stack.empty()) {
      auto [y, r] = stack.back();
      stack.pop_back();
      TripId t = tt_.trip_of_event(y);
      EventId base = tt_.trip_begin[t];
      for (std::uint32_t i = y - base; i-- > 0;) {
        EventId b = base + i;
        if (part_.event_cell_at(b, level_) != cell_) break;
        mark_boardings(b, r);
      }
    }
  }

  std::vector<TransferId> transfer_chain(const Hit& h) const {
    std::vector<TransferId> chain;
    std::uint32_t n = h.round, pos = h.pos;
    if (h.via != kInvalid) {
      chain.push_back(h.via);
      --n;  // pos already names the segment the transfer was relaxed from
    }
    while (n >= 2) {
      const Segment& seg = rounds_[n][pos];
      chain.push_back(incoming_transfer(seg, rounds_[n - 1][seg.parent]));
      pos = seg.parent;
      --n;
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
  }

 private:
  struct Relax {
    TransferId id;
    EventId src;
    std::uint32_t round;  // round of the boarded trip, source round + 1
  };

  void enqueue_into(unsigned round, TripId trip, std::uint32_t entry, std::uint32_t parent) {
    std::uint32_t cut = cell_cut(tt_, part_, level_, cell_, trip, entry);
    detail::enqueue(tt_, reached_, rounds_[round], trip, entry, cut, 0, parent);
  }

  TransferId incoming_transfer(const Segment& child, const Segment& par) const {
    EventId entered = tt_.event_at(child.trip, child.entry);
    EventId base = tt_.trip_begin[par.trip];
    for (std::uint32_t x = par.entry + 1; x <= par.end; ++x)
      for (std::uint32_t k = ts_.begin(base + x); k < ts_.end(base + x); ++k)
        if (ts_.rank[k] >= min_rank_ && ts_.to[k] == entered) return k;
    throw std::logic_error("transfer chain reconstruction failed");
  }

  const Timetable& tt_;
  const TransferSet& ts_;
  const NestedPartition& part_;
  detail::ReachedStore reached_;
  std::vector<std::vector<Segment>> rounds_;
  std::vector<Hit> hits_;
  std::vector<std::pair<EventId, std::uint32_t>> visits_;
  std::vector<Relax> relaxed_;
  std::vector<std::uint32_t> by_target_;
  std::vector<std::uint16_t> scan_stamp_;
  std::vector<std::uint16_t> scan_mask_;
  std::vector<std::uint16_t> walk_stamp_;
  std::vector<std::uint16_t> walk_mask_;
  std::uint16_t run_now_ = 0;
  unsigned level_ = 0;
  CellId cell_ = 0;
  Rank min_rank_ = 0;
};

}  // namespace

std::vector<std::pair<CellId, std::vector<EventId>>> collect_border_events(
    const Timetable& tt, const NestedPartition& part, unsigned level) {
  std::map<CellId, std::vector<EventId>> cells;
  for (TripId t = 0; t < tt.num_trips(); ++t) {
    EventId base = tt.trip_begin[t];
    std::uint32_t len = tt.trip_length(t);
    for (std::uint32_t i = 0; i + 1 < len; ++i) {
      CellId here = part.event_cell_at(base + i, level);
      CellId next = part.event_cell_at(base + i + 1, level);
      if (here != next) cells[next].push_back(base + i);
    }
  }
  return {cells.begin(), cells.end()};
}

SuccessorTable build_successor_table(const Timetable& tt, const NestedPartition& part) {
  check_trip_lengths(tt);
  SuccessorTable st;
  st.levels = part.levels;
  st.num_events = tt.num_events();
  st.data.assign(static_cast<std::size_t>(st.levels) * st.num_events, SuccessorTable::kNone);
  for (unsigned level = 0; level < st.levels; ++level) {
    std::uint8_t* row = st.data.data() + static_cast<std::size_t>(level) * st.num_events;
    for (TripId t = 0; t < tt.num_trips(); ++t) {
      EventId base = tt.trip_begin[t];
      std::uint32_t len = tt.trip_length(t);
      row[base + len - 1] = SuccessorTable::kNone;
      for (std::uint32_t i = len - 1; i-- > 0;) {
        if (part.event_cell_at(base + i + 1, level) != part.event_cell_at(base + i, level))
          row[base + i] = static_cast<std::uint8_t>(i + 1);
        else
          row[base + i] = row[base + i + 1];
      }
    }
  }
  return st;
}

TransferOverlays build_overlays(const Timetable& tt, const TransferSet& ts, unsigned levels) {
  TransferOverlays ov;
  ov.levels = levels + 1;
  ov.offset.resize(ov.levels);
  ov.to.resize(ov.levels);
  std::size_t ne = tt.num_events();
  for (unsigned l = 0; l < ov.levels; ++l) {
    auto& off = ov.offset[l];
    auto& to = ov.to[l];
    off.assign(ne + 1, 0);
    for (EventId e = 0; e < ne; ++e) {
      off[e] = static_cast<std::uint32_t>(to.size());
      for (std::uint32_t k = ts.begin(e); k < ts.end(e); ++k)
        if (ts.rank[k] >= l) to.push_back(ts.to[k]);
    }
    off[ne] = static_cast<std::uint32_t>(to.size());
  }
  return ov;
}

CellSearchResult event_tb(const Timetable& tt, const TransferSet& ts, const NestedPartition& part,
                          unsigned level, CellId cell, EventId source_ibe, Rank min_rank,
                          bool record_visits) {
  check_trip_lengths(tt);
  CellRunner runner(tt, ts, part);
  runner.run(level, cell, source_ibe, min_rank, record_visits);

  CellSearchResult res;
  for (const auto& h : runner.best_hits()) {
    res.reached.push_back({h.obe, h.round});
    res.journeys.push_back(runner.transfer_chain(h));
  }
  res.visited = runner.visits();
  std::sort(res.visited.begin(), res.visited.end());
  res.visited.erase(std::unique(res.visited.begin(), res.visited.end()), res.visited.end());
  return res;
}

void customize(const Timetable& tt, TransferSet& ts, const NestedPartition& part,
               unsigned threads) {
  check_trip_lengths(tt);
  std::fill(ts.rank.begin(), ts.rank.end(), 0);
  for (unsigned level = 0; level < part.levels; ++level) {
    auto groups = collect_border_events(tt, part, level);
    // cells at one level are disjoint and journeys stay inside their cell, so
    // the rank writes of different workers never overlap
    parallel_for(groups.size(), threads, [&](std::size_t gb, std::size_t ge) {
      CellRunner runner(tt, ts, part);
      for (std::size_t gi = gb; gi < ge; ++gi) {
        const auto& [cell, ibes] = groups[gi];
        for (EventId src : ibes) {
          runner.run(level, cell, src, static_cast<Rank>(level), false);
          runner.rank_all(ts.rank, static_cast<Rank>(level + 1));
        }
      }
    });
  }
}

void carry_ranks(const TransferSet& from, TransferSet& to_set) {
  if (from.offset.size() != to_set.offset.size())
    throw std::invalid_argument("transfer sets index different event counts");
  std::fill(to_set.rank.begin(), to_set.rank.end(), 0);
  for (EventId e = 0; e + 1 < to_set.offset.size(); ++e) {
    for (std::uint32_t k = to_set.begin(e); k < to_set.end(e); ++k) {
      auto lo = from.to.begin() + from.begin(e);
      auto hi = from.to.begin() + from.end(e);
      auto it = std::lower_bound(lo, hi, to_set.to[k]);
      if (it != hi && *it == to_set.to[k])
        to_set.rank[k] = from.rank[it - from.to.begin()];
    }
  }
}

void update_ranks(const Timetable& tt, TransferSet& ts, const NestedPartition& part,
                  const UpdateChanges& changes, UpdateMode mode, unsigned threads) {
  if (part.levels == 0) return;
  check_trip_lengths(tt);
  std::size_t ne = tt.num_events();

  std::vector<EventId> tsrc(ts.size());
  for (EventId e = 0; e < ne; ++e)
    for (std::uint32_t k = ts.begin(e); k < ts.end(e); ++k) tsrc[k] = e;

  struct Removed {
    EventId src, tgt;
    Rank rank;
  };
  struct Added {
    EventId src, tgt;
    TransferId id;
  };
  std::vector<Removed> removed;
  std::vector<Added> added;
  if (changes.before != nullptr) {
    const TransferSet& old = *changes.before;
    if (old.offset.size() != ts.offset.size())
      throw std::invalid_argument("transfer sets index different event counts");
    for (EventId e = 0; e < ne; ++e) {
      for (std::uint32_t k = old.begin(e); k < old.end(e); ++k)
        if (!ts.contains(e, old.to[k])) removed.push_back({e, old.to[k], old.rank[k]});
      for (std::uint32_t k = ts.begin(e); k < ts.end(e); ++k)
        if (!old.contains(e, ts.to[k])) added.push_back({e, ts.to[k], k});
    }
  }

  // ranks at update start, for membership change detection across passes
  std::vector<Rank> orig = ts.rank;

  // an edit shifts the trip itself and, through boarding order, every later
  // trip of its line
  std::vector<std::uint8_t> trip_seed(tt.num_trips(), 0);
  for (const auto& ed : changes.edits) {
    TripId t = tt.trip_of_event(ed.event);
    LineId l = tt.trip_line[t];
    TripId last = tt.line_trip(l, tt.line_size(l) - 1);
    for (TripId t2 = t; t2 <= last; ++t2) trip_seed[t2] = 1;
  }

  for (unsigned level = 0; level < part.levels; ++level) {
    std::vector<std::uint8_t> affected(ne, 0);
    for (const Removed& d : removed)
      if (d.rank >= level) {
        affected[d.src] = 1;
        affected[d.tgt] = 1;
      }
    for (const Added& d : added)
      if (ts.rank[d.id] >= level || level == 0) {
        affected[d.src] = 1;
        affected[d.tgt] = 1;
      }
    for (TransferId k = 0; k < ts.size(); ++k)
      if ((orig[k] >= level) != (ts.rank[k] >= level)) {
        affected[tsrc[k]] = 1;
        affected[ts.to[k]] = 1;
      }
    for (TripId t = 0; t < tt.num_trips(); ++t)
      if (trip_seed[t])
        for (EventId e = tt.trip_begin[t]; e < tt.trip_begin[t + 1]; ++e) affected[e] = 1;

    std::map<CellId, std::vector<EventId>> affected_cells;
    for (EventId e = 0; e < ne; ++e)
      if (affected[e]) affected_cells[part.event_cell_at(e, level)].push_back(e);
    if (affected_cells.empty()) continue;

    auto groups = collect_border_events(tt, part, level);
    std::vector<std::pair<CellId, const std::vector<EventId>*>> work;
    std::vector<std::pair<Time, Time>> windows;
    for (const auto& [cell, ibes] : groups) {
      auto it = affected_cells.find(cell);
      if (it == affected_cells.end()) continue;
      Time lo = kInfTime, hi = std::numeric_limits<Time>::min();
      for (EventId e : it->second) {
        lo = std::min(lo, tt.arr[e]);
        hi = std::max(hi, tt.arr[e]);
      }
      work.push_back({cell, &ibes});
      windows.push_back({lo, hi});
    }

    parallel_for(work.size(), threads, [&](std::size_t wb, std::size_t we) {
      CellRunner runner(tt, ts, part);
      for (std::size_t wi = wb; wi < we; ++wi) {
        CellId cell = work[wi].first;
        const std::vector<EventId>& ibes = *work[wi].second;
        if (mode == UpdateMode::kThorough) {
          // forget what older runs concluded about this cell at this level
          for (EventId e = 0; e < ne; ++e) {
            if (part.event_cell_at(e, level) != cell) continue;
            for (std::uint32_t k = ts.begin(e); k < ts.end(e); ++k)
              if (ts.rank[k] > level) ts.rank[k] = static_cast<Rank>(level);
          }
          for (EventId src : ibes) {
            runner.run(level, cell, src, static_cast<Rank>(level), false);
            runner.rank_all(ts.rank, static_cast<Rank>(level + 1));
          }
        } else {
          Time tau_min = windows[wi].first, tau_max = windows[wi].second;
          // group incoming border events by boarding slot, latest first; once
          // every journey of a search arrives before the window, earlier
          // trips of the slot cannot interact with it either
          std::map<std::pair<LineId, std::uint32_t>, std::vector<EventId>> slots;
          for (EventId e : ibes) {
            TripId t = tt.trip_of_event(e);
            slots[{tt.trip_line[t], tt.index_in_trip(t, e)}].push_back(e);
          }
          for (const auto& [slot, events] : slots) {
            for (auto it = events.rbegin(); it != events.rend(); ++it) {
              EventId src = *it;
              if (tt.dep[src] > tau_max) continue;
              runner.run(level, cell, src, static_cast<Rank>(level), false);
              runner.rank_all(ts.rank, static_cast<Rank>(level + 1));
              if (!runner.hits().empty()) {
                Time latest = std::numeric_limits<Time>::min();
                for (const auto& h : runner.hits()) latest = std::max(latest, tt.arr[h.obe]);
                if (latest < tau_min) break;
              }
            }
          }
        }
      }
    });
  }
}

}  // namespace trex
