#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "trex/customize.hpp"
#include "trex/partition.hpp"
#include "trex/query.hpp"
#include "trex/refkit.hpp"
#include "trex/timetable.hpp"
#include "trex/transfers.hpp"

using namespace trex;

namespace {

RawTrip make_trip(std::vector<StopId> stops, std::vector<Time> times) {
  RawTrip t;
  t.stops = std::move(stops);
  t.arr = times;
  t.dep = std::move(times);
  return t;
}

NestedPartition make_partition(const Timetable& tt, unsigned levels,
                               std::vector<CellId> stop_cells) {
  NestedPartition part;
  part.levels = levels;
  part.stop_cell = std::move(stop_cells);
  part.event_cell.resize(tt.num_events());
  for (EventId e = 0; e < tt.num_events(); ++e)
    part.event_cell[e] = part.stop_cell[tt.event_stop[e]];
  return part;
}

std::set<std::pair<EventId, EventId>> as_pairs(const TransferSet& ts) {
  std::set<std::pair<EventId, EventId>> out;
  for (EventId e = 0; e + 1 < ts.offset.size(); ++e)
    for (std::uint32_t i = ts.begin(e); i < ts.end(e); ++i) out.insert({e, ts.to[i]});
  return out;
}

std::vector<EventId> transfer_sources(const TransferSet& ts) {
  std::vector<EventId> src(ts.size());
  for (EventId e = 0; e + 1 < ts.offset.size(); ++e)
    for (std::uint32_t k = ts.begin(e); k < ts.end(e); ++k) src[k] = e;
  return src;
}

TransferId transfer_id(const TransferSet& ts, EventId from, EventId to) {
  for (std::uint32_t k = ts.begin(from); k < ts.end(from); ++k)
    if (ts.to[k] == to) return k;
  REQUIRE(false);
  return kInvalid;
}

// Two, three-stop cells joined by one crossing line each way. Reaching the
// intercity trip X from the early shuttle Y1 needs the feeder F_A; going
// back needs F_B and the late shuttle Y2. G_A is a local loop that no
// crossing journey uses.
Timetable two_cell_network() {
  std::vector<RawTrip> trips = {
      make_trip({0, 1, 2}, {20, 30, 40}),   // F_A, feeder of cell 0
      make_trip({1, 0}, {35, 45}),          // G_A, local loop in cell 0
      make_trip({2, 3}, {50, 60}),          // X, crossing into cell 1
      make_trip({3, 4, 5}, {70, 80, 90}),   // F_B, feeder of cell 1
      make_trip({5, 0}, {0, 10}),           // Y1, early crossing into cell 0
      make_trip({5, 0}, {100, 110}),        // Y2, late run of the same line
  };
  return build_timetable(std::vector<Stop>(6), trips, close_footpaths({}, 6), 86400);
}

NestedPartition two_cell_partition(const Timetable& tt) {
  return make_partition(tt, 1, {0, 0, 0, 1, 1, 1});
}

struct Instance {
  Timetable tt;
  TransferSet ts;
  NestedPartition part;
};

Instance random_instance(std::uint64_t seed, unsigned levels, bool customized) {
  SyntheticSpec spec;
  spec.stops = 40;
  spec.clusters = 3;
  spec.lines = 10;
  spec.trips_per_line = 3;
  spec.seed = seed;
  Instance in;
  in.tt = gen_synthetic(spec);
  in.ts = generate_transfers(in.tt);
  prune_uturn(in.tt, in.ts);
  prune_latest_exit(in.tt, in.ts);
  in.part = nested_bipartition(build_layout_graph(in.tt), in.tt, levels, 0.25, seed);
  if (customized) customize(in.tt, in.ts, in.part);
  return in;
}

// Walks a reported cell journey and checks every claim it makes: legs chain
// up, rides and transfer endpoints stay inside the cell, ranks clear the
// floor and the final event really is an outgoing border event.
void check_journey(const Instance& in, unsigned level, CellId cell, EventId src,
                   const CellSearchResult::Reached& reach, const std::vector<TransferId>& chain,
                   const std::vector<EventId>& tsrc, Rank min_rank) {
  REQUIRE(reach.trips == chain.size() + 1);
  TripId t = in.tt.trip_of_event(src);
  std::uint32_t idx = in.tt.index_in_trip(t, src);
  for (TransferId k : chain) {
    Rank rank = in.ts.rank[k];
    CHECK(rank >= min_rank);
    EventId s = tsrc[k];
    REQUIRE(in.tt.trip_of_event(s) == t);
    std::uint32_t si = in.tt.index_in_trip(t, s);
    REQUIRE(si > idx);
    for (std::uint32_t i = idx + 1; i <= si; ++i)
      REQUIRE(in.part.event_cell_at(in.tt.event_at(t, i), level) == cell);
    EventId g = in.ts.to[k];
    REQUIRE(in.part.event_cell_at(g, level) == cell);
    t = in.tt.trip_of_event(g);
    idx = in.tt.index_in_trip(t, g);
  }
  REQUIRE(in.tt.trip_of_event(reach.obe) == t);
  std::uint32_t oi = in.tt.index_in_trip(t, reach.obe);
  REQUIRE(oi >= idx);
  for (std::uint32_t i = idx + 1; i <= oi; ++i)
    REQUIRE(in.part.event_cell_at(in.tt.event_at(t, i), level) == cell);
  REQUIRE(oi + 1 < in.tt.trip_length(t));
  bool exits = in.part.event_cell_at(reach.obe + 1, level) != cell;
  REQUIRE(exits);
}

// Delays one event and lets the delay ripple forward through the trip.
// Returns the touched events, or nothing when the shifted trip would
// overtake a later trip of its line.
std::vector<EventTimeEdit> apply_delay(Timetable& tt, EventId event, Time delta) {
  TripId t = tt.trip_of_event(event);
  std::vector<EventTimeEdit> edits;
  Time prev_dep = 0;
  for (EventId e = event; e < tt.trip_begin[t + 1]; ++e) {
    Time arr = tt.arr[e], dep = tt.dep[e];
    if (e == event) {
      arr += delta;
      dep += delta;
    } else {
      arr = std::max(arr, prev_dep);
      dep = std::max(dep, arr);
    }
    prev_dep = dep;
    if (arr == tt.arr[e] && dep == tt.dep[e]) break;
    tt.arr[e] = arr;
    tt.dep[e] = dep;
    edits.push_back({e, arr, dep});
  }
  LineId l = tt.trip_line[t];
  for (std::uint32_t k = 0; k + 1 < tt.line_size(l); ++k) {
    TripId a = tt.line_trip(l, k), b = tt.line_trip(l, k + 1);
    for (std::uint32_t i = 0; i < tt.trip_length(a); ++i) {
      EventId ea = tt.event_at(a, i), eb = tt.event_at(b, i);
      if (tt.arr[ea] >= tt.arr[eb] || tt.dep[ea] >= tt.dep[eb]) return {};
    }
  }
  return edits;
}

TransferSet regenerate(const Timetable& tt) {
  TransferSet ts = generate_transfers(tt);
  prune_uturn(tt, ts);
  prune_latest_exit(tt, ts);
  return ts;
}

}  // namespace

TEST_CASE("a trip that stays inside its cell has no border events") {
  std::vector<RawTrip> trips = {make_trip({0, 1, 2}, {0, 10, 20})};
  Timetable tt = build_timetable(std::vector<Stop>(4), trips, close_footpaths({}, 4), 86400);
  NestedPartition part = make_partition(tt, 1, {0, 0, 0, 1});
  CHECK(collect_border_events(tt, part, 0).empty());
}

TEST_CASE("each cell crossing contributes the event before it") {
  std::vector<RawTrip> trips = {make_trip({0, 1, 2}, {0, 10, 20})};
  Timetable tt = build_timetable(std::vector<Stop>(3), trips, close_footpaths({}, 3), 86400);
  NestedPartition part = make_partition(tt, 1, {0, 1, 0});
  auto groups = collect_border_events(tt, part, 0);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].first == 0);
  CHECK(groups[0].second == std::vector<EventId>{1});
  CHECK(groups[1].first == 1);
  CHECK(groups[1].second == std::vector<EventId>{0});
}

TEST_CASE("border events match a scan over consecutive event pairs") {
  Instance in = random_instance(11, 3, false);
  for (unsigned level = 0; level < 3; ++level) {
    std::map<CellId, std::set<EventId>> expect;
    for (TripId t = 0; t < in.tt.num_trips(); ++t)
      for (std::uint32_t i = 0; i + 1 < in.tt.trip_length(t); ++i) {
        EventId e = in.tt.event_at(t, i);
        CellId a = in.part.event_cell_at(e, level);
        CellId b = in.part.event_cell_at(e + 1, level);
        if (a != b) expect[b].insert(e);
      }
    auto groups = collect_border_events(in.tt, in.part, level);
    REQUIRE(groups.size() == expect.size());
    for (const auto& [cell, events] : groups) {
      REQUIRE(expect.count(cell) == 1);
      CHECK(std::is_sorted(events.begin(), events.end()));
      CHECK(std::set<EventId>(events.begin(), events.end()) == expect[cell]);
    }
  }
}

TEST_CASE("successor table resolves the first cell change after each event") {
  SUBCASE("trip inside one cell never leaves") {
    std::vector<RawTrip> trips = {make_trip({0, 1, 2}, {0, 10, 20})};
    Timetable tt = build_timetable(std::vector<Stop>(4), trips, close_footpaths({}, 4), 86400);
    NestedPartition part = make_partition(tt, 1, {0, 0, 0, 1});
    SuccessorTable succ = build_successor_table(tt, part);
    REQUIRE(succ.levels == 1);
    for (EventId e = 0; e < 3; ++e) {
      CHECK(succ.raw(0, e) == SuccessorTable::kNone);
      CHECK(succ.at(tt, 0, 0, e) == 3);
    }
  }
  SUBCASE("change at the third stop is seen from both earlier events") {
    std::vector<RawTrip> trips = {make_trip({0, 1, 2}, {0, 10, 20})};
    Timetable tt = build_timetable(std::vector<Stop>(3), trips, close_footpaths({}, 3), 86400);
    NestedPartition part = make_partition(tt, 1, {0, 0, 1});
    SuccessorTable succ = build_successor_table(tt, part);
    CHECK(succ.raw(0, 0) == 2);
    CHECK(succ.raw(0, 1) == 2);
    CHECK(succ.raw(0, 2) == SuccessorTable::kNone);
  }
  SUBCASE("matches a forward scan and is monotone in the level") {
    Instance in = random_instance(12, 3, false);
    SuccessorTable succ = build_successor_table(in.tt, in.part);
    REQUIRE(succ.levels == 3);
    REQUIRE(succ.num_events == in.tt.num_events());
    for (TripId t = 0; t < in.tt.num_trips(); ++t) {
      std::uint32_t len = in.tt.trip_length(t);
      for (std::uint32_t i = 0; i < len; ++i) {
        EventId e = in.tt.event_at(t, i);
        for (unsigned level = 0; level < in.part.levels; ++level) {
          CellId own = in.part.event_cell_at(e, level);
          std::uint32_t expect = len;
          for (std::uint32_t j = i; j < len; ++j)
            if (in.part.event_cell_at(in.tt.event_at(t, j), level) != own) {
              expect = j;
              break;
            }
          std::uint32_t got = succ.at(in.tt, level, t, e);
          CHECK(got == expect);
          CHECK(got > i);
          if (level > 0) {
            std::uint32_t below = succ.at(in.tt, level - 1, t, e);
            CHECK(got >= below);
          }
        }
      }
    }
  }
  SUBCASE("rejects trips with too many events for the index byte") {
    std::vector<StopId> stops(300);
    std::vector<Time> times(300);
    for (std::uint32_t i = 0; i < 300; ++i) {
      stops[i] = i;
      times[i] = 10 * i;
    }
    std::vector<RawTrip> trips = {make_trip(stops, times)};
    Timetable tt =
        build_timetable(std::vector<Stop>(300), trips, close_footpaths({}, 300), 86400);
    NestedPartition part = make_partition(tt, 1, std::vector<CellId>(300, 0));
    CHECK_THROWS_AS(build_successor_table(tt, part), std::runtime_error);
  }
}

TEST_CASE("overlays keep exactly the transfers at or above each level") {
  SUBCASE("fresh ranks put everything on level zero") {
    Instance in = random_instance(13, 2, false);
    TransferOverlays ov = build_overlays(in.tt, in.ts, 2);
    REQUIRE(ov.levels == 3);
    CHECK(ov.size(0) == in.ts.size());
    CHECK(ov.size(1) == 0);
    CHECK(ov.size(2) == 0);
    CHECK(ov.offset[0] == in.ts.offset);
    CHECK(ov.to[0] == in.ts.to);
  }
  SUBCASE("a rank ladder thins out one transfer per level") {
    std::vector<RawTrip> trips = {
        make_trip({0, 1}, {0, 10}),
        make_trip({1, 2}, {15, 25}),
        make_trip({2, 3}, {30, 40}),
        make_trip({3, 4}, {45, 55}),
    };
    Timetable tt = build_timetable(std::vector<Stop>(5), trips, close_footpaths({}, 5), 86400);
    TransferSet ts = generate_transfers(tt);
    REQUIRE(ts.size() == 3);
    ts.rank = {0, 1, 2};
    TransferOverlays ov = build_overlays(tt, ts, 2);
    REQUIRE(ov.levels == 3);
    CHECK(ov.size(0) == 3);
    CHECK(ov.size(1) == 2);
    CHECK(ov.size(2) == 1);
    for (unsigned level = 0; level < 3; ++level)
      for (EventId e = 0; e < tt.num_events(); ++e) {
        std::vector<EventId> expect;
        for (std::uint32_t k = ts.begin(e); k < ts.end(e); ++k)
          if (ts.rank[k] >= level) expect.push_back(ts.to[k]);
        std::vector<EventId> got(ov.to[level].begin() + ov.offset[level][e],
                                 ov.to[level].begin() + ov.offset[level][e + 1]);
        CHECK(got == expect);
      }
  }
}

TEST_CASE("cell search follows the source trip out of the cell") {
  std::vector<RawTrip> trips = {make_trip({3, 1, 4}, {0, 10, 20})};
  Timetable tt = build_timetable(std::vector<Stop>(5), trips, close_footpaths({}, 5), 86400);
  NestedPartition part = make_partition(tt, 1, {0, 1, 0, 0, 0});
  TransferSet ts = generate_transfers(tt);
  CellSearchResult res = event_tb(tt, ts, part, 0, 1, 0, 0);
  REQUIRE(res.reached.size() == 1);
  CHECK(res.reached[0] == CellSearchResult::Reached{1, 1});
  CHECK(res.journeys[0].empty());
}

TEST_CASE("cell search ignores trips it cannot transfer to") {
  std::vector<RawTrip> trips = {
      make_trip({0, 1, 2, 3}, {0, 10, 20, 30}),
      make_trip({1, 2}, {2, 5}),  // gone before the first trip arrives
  };
  Timetable tt = build_timetable(std::vector<Stop>(4), trips, close_footpaths({}, 4), 86400);
  NestedPartition part = make_partition(tt, 1, {0, 1, 1, 0});
  TransferSet ts = generate_transfers(tt);
  // the only transfer runs the wrong way, from the early trip back onto
  // the long one, so the search never boards anything
  std::set<std::pair<EventId, EventId>> expect = {{5, 2}};
  REQUIRE(as_pairs(ts) == expect);
  CellSearchResult res = event_tb(tt, ts, part, 0, 1, 0, 0);
  REQUIRE(res.reached.size() == 1);
  CHECK(res.reached[0] == CellSearchResult::Reached{2, 1});
  CHECK(res.journeys[0].empty());
}

TEST_CASE("cell search reports the crossing journeys of the two cell network") {
  Timetable tt = two_cell_network();
  NestedPartition part = two_cell_partition(tt);
  TransferSet ts = generate_transfers(tt);

  // events: F_A 0-2, G_A 3-4, X 5-6, F_B 7-9, Y1 10-11, Y2 12-13
  std::set<std::pair<EventId, EventId>> expect = {
      {1, 3}, {2, 5}, {6, 7}, {9, 12}, {11, 0}};
  REQUIRE(as_pairs(ts) == expect);

  auto groups = collect_border_events(tt, part, 0);
  REQUIRE(groups.size() == 2);
  REQUIRE(groups[0].second == std::vector<EventId>{10, 12});
  REQUIRE(groups[1].second == std::vector<EventId>{5});

  std::vector<EventId> tsrc = transfer_sources(ts);

  SUBCASE("early shuttle crosses via feeder and intercity") {
    CellSearchResult res = event_tb(tt, ts, part, 0, 0, 10, 0);
    REQUIRE(res.reached.size() == 1);
    CHECK(res.reached[0] == CellSearchResult::Reached{5, 3});
    std::vector<TransferId> chain = {transfer_id(ts, 11, 0), transfer_id(ts, 2, 5)};
    CHECK(res.journeys[0] == chain);
  }
  SUBCASE("intercity crosses back via the late shuttle") {
    CellSearchResult res = event_tb(tt, ts, part, 0, 1, 5, 0);
    REQUIRE(res.reached.size() == 1);
    CHECK(res.reached[0] == CellSearchResult::Reached{12, 3});
    std::vector<TransferId> chain = {transfer_id(ts, 6, 7), transfer_id(ts, 9, 12)};
    CHECK(res.journeys[0] == chain);
  }
  SUBCASE("late shuttle strands in cell 0") {
    CellSearchResult res = event_tb(tt, ts, part, 0, 0, 12, 0);
    CHECK(res.reached.empty());
  }
}

TEST_CASE("cell search agrees with the breadth first reference") {
  for (std::uint64_t seed : {21, 22, 23}) {
    Instance in = random_instance(seed, 2, false);
    std::vector<EventId> tsrc = transfer_sources(in.ts);
    for (unsigned level = 0; level < 2; ++level) {
      unsigned checked = 0;
      for (const auto& [cell, ibes] : collect_border_events(in.tt, in.part, level)) {
        for (EventId src : ibes) {
          if (++checked > 40) break;
          CellSearchResult res = event_tb(in.tt, in.ts, in.part, level, cell, src, 0);
          auto oracle = oracle_cell_traversal(in.tt, in.ts, in.part, level, cell, src, 0);
          REQUIRE(res.reached.size() == oracle.size());
          for (std::size_t i = 0; i < oracle.size(); ++i) {
            CHECK(res.reached[i].obe == oracle[i].obe);
            CHECK(res.reached[i].trips == oracle[i].trips);
            check_journey(in, level, cell, src, res.reached[i], res.journeys[i], tsrc, 0);
          }
        }
      }
    }
  }
}

TEST_CASE("cell search respects the rank floor") {
  Instance in = random_instance(24, 2, true);
  std::vector<EventId> tsrc = transfer_sources(in.ts);
  unsigned level = 1;
  unsigned checked = 0;
  for (const auto& [cell, ibes] : collect_border_events(in.tt, in.part, level)) {
    for (EventId src : ibes) {
      if (++checked > 40) break;
      CellSearchResult res = event_tb(in.tt, in.ts, in.part, level, cell, src, 1);
      auto oracle = oracle_cell_traversal(in.tt, in.ts, in.part, level, cell, src, 1);
      REQUIRE(res.reached.size() == oracle.size());
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(res.reached[i].obe == oracle[i].obe);
        CHECK(res.reached[i].trips == oracle[i].trips);
        check_journey(in, level, cell, src, res.reached[i], res.journeys[i], tsrc, 1);
      }
    }
  }
}

TEST_CASE("visited pairs are sorted and cover the ridden exits") {
  Instance in = random_instance(25, 2, false);
  unsigned checked = 0;
  for (const auto& [cell, ibes] : collect_border_events(in.tt, in.part, 0)) {
    for (EventId src : ibes) {
      if (++checked > 30) break;
      CellSearchResult res = event_tb(in.tt, in.ts, in.part, 0, cell, src, 0, true);
      CHECK(std::is_sorted(res.visited.begin(), res.visited.end()));
      CHECK(std::adjacent_find(res.visited.begin(), res.visited.end()) == res.visited.end());
      for (const auto& [e, n] : res.visited) {
        CHECK(in.part.event_cell_at(e, 0) == cell);
        CHECK(n >= 1);
        CHECK(n <= 16);
      }
    }
  }
}

TEST_CASE("customization on a flat partition leaves every rank zero") {
  Timetable tt = two_cell_network();
  TransferSet ts = generate_transfers(tt);
  std::fill(ts.rank.begin(), ts.rank.end(), 3);
  NestedPartition part = make_partition(tt, 0, std::vector<CellId>(6, 0));
  customize(tt, ts, part);
  for (Rank r : ts.rank) CHECK(r == 0);
}

TEST_CASE("customization ranks the crossing transfers of the two cell network") {
  Timetable tt = two_cell_network();
  NestedPartition part = two_cell_partition(tt);
  TransferSet ts = generate_transfers(tt);
  customize(tt, ts, part);
  CHECK(ts.rank[transfer_id(ts, 11, 0)] == 1);
  CHECK(ts.rank[transfer_id(ts, 2, 5)] == 1);
  CHECK(ts.rank[transfer_id(ts, 6, 7)] == 1);
  CHECK(ts.rank[transfer_id(ts, 9, 12)] == 1);
  CHECK(ts.rank[transfer_id(ts, 1, 3)] == 0);
}

TEST_CASE("ranks admit every transfer of an unrestricted query journey") {
  for (std::uint64_t seed : {31, 32}) {
    Instance in = random_instance(seed, 4, true);
    std::vector<EventId> tsrc = transfer_sources(in.ts);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<StopId> pick_stop(0, in.tt.num_stops() - 1);
    std::uniform_int_distribution<Time> pick_dep(0, 43200);
    for (int q = 0; q < 150; ++q) {
      StopId from = pick_stop(rng), to = pick_stop(rng);
      QueryResult res = tb_query(in.tt, in.ts, from, to, pick_dep(rng));
      CellId c_s = in.part.stop_cell[from], c_t = in.part.stop_cell[to];
      for (const Journey& j : res.journeys) {
        for (std::size_t i = 0; i + 1 < j.legs.size(); ++i) {
          EventId exit = in.tt.event_at(j.legs[i].trip, j.legs[i].exit);
          EventId enter = in.tt.event_at(j.legs[i + 1].trip, j.legs[i + 1].enter);
          TransferId k = transfer_id(in.ts, exit, enter);
          CellId c_p = in.part.stop_cell[in.tt.event_stop[exit]];
          bool admitted = lcl_test(in.ts.rank[k], c_p, c_s, c_t);
          CHECK(admitted);
        }
      }
    }
  }
}

TEST_CASE("customization is deterministic across thread counts and reruns") {
  Instance in = random_instance(33, 3, false);
  TransferSet one = in.ts, four = in.ts;
  customize(in.tt, one, in.part, 1);
  customize(in.tt, four, in.part, 4);
  CHECK(one.rank == four.rank);
  TransferSet again = one;
  customize(in.tt, again, in.part, 1);
  CHECK(again.rank == one.rank);
}

TEST_CASE("carrying ranks matches pairs and zeroes the rest") {
  Timetable tt = two_cell_network();
  NestedPartition part = two_cell_partition(tt);
  TransferSet from = generate_transfers(tt);
  customize(tt, from, part);

  SUBCASE("identical structure copies all ranks") {
    TransferSet to_set = generate_transfers(tt);
    std::fill(to_set.rank.begin(), to_set.rank.end(), 7);
    carry_ranks(from, to_set);
    CHECK(to_set.rank == from.rank);
  }
  SUBCASE("pairs missing from the source keep rank zero") {
    TransferId victim = transfer_id(from, 2, 5);
    std::vector<EventId> tsrc = transfer_sources(from);
    TransferSet small;
    small.offset.assign(from.offset.size(), 0);
    for (TransferId k = 0; k < from.size(); ++k) {
      if (k == victim) continue;
      small.to.push_back(from.to[k]);
      small.rank.push_back(from.rank[k]);
      ++small.offset[tsrc[k] + 1];
    }
    for (std::size_t i = 1; i < small.offset.size(); ++i) small.offset[i] += small.offset[i - 1];
    TransferSet to_set = generate_transfers(tt);
    carry_ranks(small, to_set);
    CHECK(to_set.rank[victim] == 0);
    CHECK(to_set.rank[transfer_id(to_set, 11, 0)] == 1);
    CHECK(to_set.rank[transfer_id(to_set, 6, 7)] == 1);
  }
  SUBCASE("mismatched event counts are rejected") {
    std::vector<RawTrip> trips = {make_trip({0, 1}, {0, 10})};
    Timetable other =
        build_timetable(std::vector<Stop>(2), trips, close_footpaths({}, 2), 86400);
    TransferSet to_set = generate_transfers(other);
    CHECK_THROWS_AS(carry_ranks(from, to_set), std::invalid_argument);
  }
}

TEST_CASE("an empty change set leaves the ranks alone") {
  Instance in = random_instance(41, 3, true);
  std::vector<Rank> before = in.ts.rank;
  UpdateChanges changes;
  changes.before = &in.ts;
  TransferSet copy = in.ts;
  update_ranks(in.tt, copy, in.part, changes, UpdateMode::kThorough);
  CHECK(copy.rank == before);
  copy = in.ts;
  update_ranks(in.tt, copy, in.part, changes, UpdateMode::kWindowed);
  CHECK(copy.rank == before);
}

TEST_CASE("thorough updates reproduce a full recustomization") {
  for (std::uint64_t seed : {51, 52, 53}) {
    Instance in = random_instance(seed, 3, true);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<EventId> pick_event(0, in.tt.num_events() - 1);

    Timetable delayed = in.tt;
    std::vector<EventTimeEdit> edits;
    for (int tries = 0; tries < 50 && edits.empty(); ++tries)
      edits = apply_delay(delayed, pick_event(rng), 300);
    REQUIRE(!edits.empty());

    TransferSet updated = regenerate(delayed);
    carry_ranks(in.ts, updated);
    UpdateChanges changes{edits, &in.ts};
    update_ranks(delayed, updated, in.part, changes, UpdateMode::kThorough);

    TransferSet fresh = regenerate(delayed);
    customize(delayed, fresh, in.part);
    REQUIRE(updated.to == fresh.to);
    CHECK(updated.rank == fresh.rank);
  }
}

TEST_CASE("windowed updates keep overlay queries exact") {
  for (std::uint64_t seed : {61, 62}) {
    Instance in = random_instance(seed, 3, true);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_int_distribution<EventId> pick_event(0, in.tt.num_events() - 1);

    Timetable delayed = in.tt;
    std::vector<EventTimeEdit> edits;
    for (int tries = 0; tries < 50 && edits.empty(); ++tries)
      edits = apply_delay(delayed, pick_event(rng), 600);
    REQUIRE(!edits.empty());

    TransferSet updated = regenerate(delayed);
    carry_ranks(in.ts, updated);
    UpdateChanges changes{edits, &in.ts};
    update_ranks(delayed, updated, in.part, changes, UpdateMode::kWindowed);

    TransferOverlays ov = build_overlays(delayed, updated, in.part.levels);
    SuccessorTable succ = build_successor_table(delayed, in.part);
    std::uniform_int_distribution<StopId> pick_stop(0, delayed.num_stops() - 1);
    std::uniform_int_distribution<Time> pick_dep(0, 43200);
    for (int q = 0; q < 60; ++q) {
      StopId from = pick_stop(rng), to = pick_stop(rng);
      Time dep = pick_dep(rng);
      auto expect = oracle_front(delayed, from, to, dep);
      QueryResult basic = trex_query_basic(delayed, updated, in.part, from, to, dep, false);
      CHECK(basic.front == expect);
      QueryResult over =
          trex_query_overlay(delayed, updated, in.part, ov, succ, from, to, dep, false);
      CHECK(over.front == expect);
    }
  }
}
