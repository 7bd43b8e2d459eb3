#include "trex/query.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

#include "trex/refkit.hpp"

namespace trex {

namespace {

// earliest trip of the line enterable at `index` no earlier than `at`
TripId earliest_boardable(const Timetable& tt, LineId line, std::uint32_t index, Time at) {
  std::uint32_t lo = 0, hi = tt.line_size(line);
  while (lo < hi) {
    std::uint32_t mid = (lo + hi) / 2;
    if (tt.dep[tt.event_at(tt.line_trip(line, mid), index)] >= at)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo == tt.line_size(line) ? kInvalid : tt.line_trip(line, lo);
}

}  // namespace

QueryEngine::QueryEngine(const Timetable& tt, const TransferSet& ts, const NestedPartition* part,
                         const TransferOverlays* overlays, const SuccessorTable* succ)
    : tt_(tt), ts_(ts), part_(part), ov_(overlays), succ_(succ) {
  for (TripId t = 0; t < tt.num_trips(); ++t)
    if (tt.trip_length(t) > detail::kMaxTripEvents)
      throw std::runtime_error("trip " + std::to_string(t) + " has " +
                               std::to_string(tt.trip_length(t)) +
                               " events; trips are capped at 254 events");
  reached_.init(tt.num_trips());
  rounds_.resize(detail::kMaxRounds + 1);
}

void QueryEngine::prepare(StopId from, StopId to, Algo algo) {
  if (from >= tt_.num_stops() || to >= tt_.num_stops())
    throw std::invalid_argument("stop id out of range");
  if (algo != Algo::kTb && part_ == nullptr)
    throw std::invalid_argument("cell-based queries need a partition");
  if (algo == Algo::kTrexOverlay && (ov_ == nullptr || succ_ == nullptr))
    throw std::invalid_argument("overlay queries need overlays and a successor table");
  from_ = from;
  to_ = to;
  algo_ = algo;
  cell_from_ = part_ != nullptr ? part_->stop_cell[from] : 0;
  cell_to_ = part_ != nullptr ? part_->stop_cell[to] : 0;
  std::fill(std::begin(min_arr_), std::end(min_arr_), kInfTime);
  labels_.clear();
  reached_.next_query();
}

std::uint8_t QueryEngine::entry_level(StopId at) const {
  CellId c = part_->stop_cell[at];
  return static_cast<std::uint8_t>(std::min(lcl(c, cell_from_), lcl(c, cell_to_)));
}

void QueryEngine::insert_label(Time arrival, unsigned round, std::uint32_t pos,
                               std::uint32_t exit) {
  labels_.push_back({arrival, round, pos, exit});
  for (unsigned n = round; n <= detail::kMaxRounds; ++n)
    if (arrival < min_arr_[n]) min_arr_[n] = arrival;
}

void QueryEngine::init_round_one(Time dep) {
  const FootpathSet& fp = tt_.footpaths;
  for (std::uint32_t i = fp.begin(from_); i < fp.end(from_); ++i) {
    StopId q = fp.target[i];
    Time at = dep + fp.duration[i];
    for (std::uint32_t o = tt_.stop_line_begin[q]; o < tt_.stop_line_begin[q + 1]; ++o) {
      const LineStop& ls = tt_.stop_lines[o];
      if (ls.index + 1 >= tt_.line_length(ls.line)) continue;
      TripId t = earliest_boardable(tt_, ls.line, ls.index, at);
      if (t == kInvalid) continue;
      std::uint8_t lev = algo_ == Algo::kTrexOverlay ? entry_level(q) : 0;
      detail::enqueue_round(tt_, reached_, rounds_[1], 1, t, ls.index, lev, kInvalid);
    }
  }
}

void QueryEngine::exec(Time dep, QueryMetrics& m) {
  for (auto& r : rounds_) r.clear();
  Time walk = tt_.footpaths.between(from_, to_);
  if (walk != kInfTime && dep + walk < min_arr_[0]) insert_label(dep + walk, 0, kInvalid, kInvalid);
  init_round_one(dep);
  for (unsigned n = 1; n <= detail::kMaxRounds; ++n) {
    if (rounds_[n].empty()) break;
    m.rounds = std::max(m.rounds, n);
    if (algo_ == Algo::kTrexOverlay)
      scan_overlay(n, m);
    else
      scan_plain(n, m);
  }
}

void QueryEngine::scan_plain(unsigned n, QueryMetrics& m) {
  auto& q = rounds_[n];
  const FootpathSet& fp = tt_.footpaths;

  // final footpaths onto the target
  for (std::uint32_t pos = 0; pos < q.size(); ++pos) {
    ++m.scanned_segments;
    const detail::Segment& seg = q[pos];
    EventId base = tt_.trip_begin[seg.trip];
    for (std::uint32_t x = seg.entry + 1u; x <= seg.end; ++x) {
      if (tt_.arr[base + x] >= min_arr_[n]) break;
      Time d = fp.between(tt_.event_stop[base + x], to_);
      if (d == kInfTime) continue;
      Time a = tt_.arr[base + x] + d;
      if (a < min_arr_[n]) insert_label(a, n, pos, x);
    }
  }
  if (n == detail::kMaxRounds) return;

  // shorten segments to the improved bound; exits at or past it cannot start
  // anything that still improves a later round
  for (detail::Segment& seg : q) {
    EventId base = tt_.trip_begin[seg.trip];
    for (std::uint32_t x = seg.entry + 1u; x <= seg.end; ++x) {
      if (tt_.arr[base + x] >= min_arr_[n + 1]) {
        seg.end = static_cast<std::uint16_t>(x - 1);
        break;
      }
    }
  }

  // relax outgoing transfers
  for (std::uint32_t pos = 0; pos < q.size(); ++pos) {
    const detail::Segment& seg = q[pos];
    EventId base = tt_.trip_begin[seg.trip];
    for (std::uint32_t x = seg.entry + 1u; x <= seg.end; ++x) {
      EventId e = base + x;
      for (std::uint32_t k = ts_.begin(e); k < ts_.end(e); ++k) {
        if (algo_ == Algo::kTrexBasic &&
            !lcl_test(ts_.rank[k], part_->stop_cell[tt_.event_stop[e]], cell_from_, cell_to_)) {
          ++m.skipped_transfers;
          continue;
        }
        ++m.relaxed_transfers;
        EventId target = ts_.to[k];
        TripId t2 = tt_.trip_of_event(target);
        detail::enqueue_round(tt_, reached_, rounds_[n + 1], n + 1, t2,
                              tt_.index_in_trip(t2, target), 0, pos);
      }
    }
  }
}

void QueryEngine::split(const detail::Segment& seg, std::uint32_t pos,
                        std::vector<Piece>& out) const {
  if (part_->levels == 0) {
    out.push_back({pos, seg.entry + 1u, seg.end, 0, true, false});
    return;
  }
  EventId base = tt_.trip_begin[seg.trip];
  std::uint32_t anchor = seg.entry;
  std::uint8_t lev = seg.level;
  std::uint32_t first = seg.entry + 1u;
  while (true) {
    unsigned sl = lev == 0 ? 0u : static_cast<unsigned>(lev) - 1u;
    std::uint32_t cut = succ_->at(tt_, sl, seg.trip, base + anchor);
    std::uint32_t end = std::min(cut - 1, static_cast<std::uint32_t>(seg.end));
    bool target = part_->stop_cell[tt_.event_stop[base + anchor]] == cell_to_;
    if (first <= end) out.push_back({pos, first, end, lev, target, false});
    if (cut > seg.end) break;
    anchor = cut;
    first = cut;  // the boundary stop itself is a new stop, exits resume there
    lev = entry_level(tt_.event_stop[base + cut]);
  }
}

void QueryEngine::scan_overlay(unsigned n, QueryMetrics& m) {
  auto& q = rounds_[n];
  const FootpathSet& fp = tt_.footpaths;
  pieces_.clear();
  for (std::uint32_t pos = 0; pos < q.size(); ++pos) {
    ++m.scanned_segments;
    split(q[pos], pos, pieces_);
  }

  // target checks only on pieces anchored in the target's cell
  for (const Piece& pc : pieces_) {
    if (!pc.target) continue;
    const detail::Segment& seg = q[pc.pos];
    EventId base = tt_.trip_begin[seg.trip];
    for (std::uint32_t x = pc.first; x <= pc.end; ++x) {
      if (tt_.arr[base + x] >= min_arr_[n]) break;
      Time d = fp.between(tt_.event_stop[base + x], to_);
      if (d == kInfTime) continue;
      Time a = tt_.arr[base + x] + d;
      if (a < min_arr_[n]) insert_label(a, n, pc.pos, x);
    }
  }
  if (n == detail::kMaxRounds) return;

  // lazy pruning: a piece whose first exit misses the bound is dropped whole
  for (Piece& pc : pieces_) {
    const detail::Segment& seg = q[pc.pos];
    if (tt_.arr[tt_.trip_begin[seg.trip] + pc.first] >= min_arr_[n + 1]) pc.skip = true;
  }

  for (const Piece& pc : pieces_) {
    if (pc.skip) continue;
    const detail::Segment& seg = q[pc.pos];
    EventId base = tt_.trip_begin[seg.trip];
    const auto& off = ov_->offset[pc.level];
    const auto& tov = ov_->to[pc.level];
    for (std::uint32_t x = pc.first; x <= pc.end; ++x) {
      EventId e = base + x;
      if (tt_.arr[e] >= min_arr_[n + 1]) break;
      for (std::uint32_t k = off[e]; k < off[e + 1]; ++k) {
        ++m.relaxed_transfers;
        EventId target = tov[k];
        TripId t2 = tt_.trip_of_event(target);
        detail::enqueue_round(tt_, reached_, rounds_[n + 1], n + 1, t2,
                              tt_.index_in_trip(t2, target),
                              entry_level(tt_.event_stop[target]), pc.pos);
      }
    }
  }
}

std::uint32_t QueryEngine::parent_exit(const detail::Segment& par, EventId entered) const {
  EventId base = tt_.trip_begin[par.trip];
  if (algo_ == Algo::kTrexOverlay) {
    // walk the split pieces so only transfers the engine would relax count
    std::vector<Piece> pieces;
    split(par, 0, pieces);
    for (const Piece& pc : pieces) {
      const auto& off = ov_->offset[pc.level];
      const auto& tov = ov_->to[pc.level];
      for (std::uint32_t x = pc.first; x <= pc.end; ++x) {
        EventId e = base + x;
        for (std::uint32_t k = off[e]; k < off[e + 1]; ++k)
          if (tov[k] == entered) return x;
      }
    }
  } else {
    for (std::uint32_t x = par.entry + 1u; x <= par.end; ++x) {
      EventId e = base + x;
      for (std::uint32_t k = ts_.begin(e); k < ts_.end(e); ++k) {
        if (ts_.to[k] != entered) continue;
        if (algo_ == Algo::kTrexBasic &&
            !lcl_test(ts_.rank[k], part_->stop_cell[tt_.event_stop[e]], cell_from_, cell_to_))
          continue;
        return x;
      }
    }
  }
  throw std::logic_error("journey reconstruction lost the connecting transfer");
}

Journey QueryEngine::unpack(const Label& l) const {
  Journey j;
  j.from = from_;
  j.to = to_;
  j.arrival = l.arrival;
  if (l.round == 0) {
    j.departure = dep_;
    return j;
  }
  std::uint32_t n = l.round, pos = l.pos, exit = l.exit;
  while (true) {
    const detail::Segment& seg = rounds_[n][pos];
    j.legs.push_back({seg.trip, seg.entry, exit});
    if (seg.parent == kInvalid) break;
    EventId entered = tt_.event_at(seg.trip, seg.entry);
    exit = parent_exit(rounds_[n - 1][seg.parent], entered);
    pos = seg.parent;
    --n;
  }
  std::reverse(j.legs.begin(), j.legs.end());
  EventId e0 = tt_.event_at(j.legs.front().trip, j.legs.front().enter);
  j.departure = tt_.dep[e0] - tt_.footpaths.between(from_, tt_.event_stop[e0]);
  return j;
}

void QueryEngine::harvest(std::uint32_t last[]) const {
  std::fill(last, last + detail::kMaxRounds + 1, kInvalid);
  for (std::uint32_t i = 0; i < labels_.size(); ++i) last[labels_[i].round] = i;
}

QueryResult QueryEngine::run(StopId from, StopId to, Time dep, Algo algo, bool with_journeys) {
  prepare(from, to, algo);
  dep_ = dep;
  QueryResult res;
  exec(dep, res.metrics);

  // the final label of each round is its best; bounds make them a Pareto front
  std::uint32_t last[detail::kMaxRounds + 1];
  harvest(last);
  for (unsigned n = 0; n <= detail::kMaxRounds; ++n)
    if (last[n] != kInvalid) res.front.push_back({labels_[last[n]].arrival, n});
  if (with_journeys) {
    auto t0 = std::chrono::steady_clock::now();
    for (unsigned n = 0; n <= detail::kMaxRounds; ++n)
      if (last[n] != kInvalid) res.journeys.push_back(unpack(labels_[last[n]]));
    res.metrics.unpack_micros = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() -
                                                              t0)
            .count());
  }
  return res;
}

std::vector<ProfileEntry> QueryEngine::profile(StopId from, StopId to, Time start, Time end,
                                               Algo algo) {
  prepare(from, to, algo);
  std::vector<ProfileEntry> out;
  QueryMetrics scratch;
  for (Time dep : profile_departures(tt_, from, start, end)) {
    labels_.clear();
    dep_ = dep;
    exec(dep, scratch);
    std::uint32_t last[detail::kMaxRounds + 1];
    harvest(last);
    for (unsigned n = 0; n <= detail::kMaxRounds; ++n)
      if (last[n] != kInvalid) out.push_back({dep, labels_[last[n]].arrival, n});
  }
  return out;
}

QueryResult tb_query(const Timetable& tt, const TransferSet& ts, StopId from, StopId to, Time dep,
                     bool with_journeys) {
  QueryEngine e(tt, ts);
  return e.run(from, to, dep, Algo::kTb, with_journeys);
}

QueryResult trex_query_basic(const Timetable& tt, const TransferSet& ts,
                             const NestedPartition& part, StopId from, StopId to, Time dep,
                             bool with_journeys) {
  QueryEngine e(tt, ts, &part);
  return e.run(from, to, dep, Algo::kTrexBasic, with_journeys);
}

QueryResult trex_query_overlay(const Timetable& tt, const TransferSet& ts,
                               const NestedPartition& part, const TransferOverlays& overlays,
                               const SuccessorTable& succ, StopId from, StopId to, Time dep,
                               bool with_journeys) {
  QueryEngine e(tt, ts, &part, &overlays, &succ);
  return e.run(from, to, dep, Algo::kTrexOverlay, with_journeys);
}

}  // namespace trex
