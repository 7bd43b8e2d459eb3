#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "trex/partition.hpp"
#include "trex/refkit.hpp"
#include "trex/timetable.hpp"
#include "trex/util.hpp"

using namespace trex;

namespace {

RawTrip make_trip(std::vector<StopId> stops, std::vector<Time> times) {
  RawTrip t;
  t.stops = std::move(stops);
  t.arr = times;
  t.dep = std::move(times);
  return t;
}

// undirected weighted graph with unit vertex weights as a layout graph
LayoutGraph simple_graph(std::size_t n,
                         const std::vector<std::tuple<std::uint32_t, std::uint32_t,
                                                      std::uint32_t>>& edges) {
  LayoutGraph g;
  g.stop_vertex.resize(n);
  std::iota(g.stop_vertex.begin(), g.stop_vertex.end(), 0u);
  g.vertex_weight.assign(n, 1);
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> adj(n);
  for (const auto& [a, b, w] : edges) {
    adj[a].push_back({b, w});
    adj[b].push_back({a, w});
  }
  g.adj_begin.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    g.adj_begin[v + 1] = g.adj_begin[v] + static_cast<std::uint32_t>(adj[v].size());
    for (const auto& [x, w] : adj[v]) {
      g.adj_vertex.push_back(x);
      g.adj_weight.push_back(w);
    }
  }
  return g;
}

std::uint64_t cut_weight(const LayoutGraph& g, const std::vector<std::uint32_t>& verts,
                         const std::vector<std::uint8_t>& side) {
  std::vector<std::uint32_t> where(g.num_vertices(), kInvalid);
  for (std::uint32_t i = 0; i < verts.size(); ++i) where[verts[i]] = i;
  std::uint64_t cut = 0;
  for (std::uint32_t i = 0; i < verts.size(); ++i) {
    std::uint32_t v = verts[i];
    for (std::uint32_t k = g.adj_begin[v]; k < g.adj_begin[v + 1]; ++k) {
      std::uint32_t u = g.adj_vertex[k];
      if (where[u] == kInvalid) continue;
      if (side[i] != side[where[u]]) cut += g.adj_weight[k];
    }
  }
  return cut / 2;
}

std::vector<std::uint32_t> all_verts(const LayoutGraph& g) {
  std::vector<std::uint32_t> v(g.num_vertices());
  std::iota(v.begin(), v.end(), 0u);
  return v;
}

LayoutGraph two_cliques_and_a_bridge() {
  std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t a = 0; a < 5; ++a)
    for (std::uint32_t b = a + 1; b < 5; ++b) {
      edges.push_back({a, b, 1});
      edges.push_back({a + 5, b + 5, 1});
    }
  edges.push_back({4, 5, 1});
  return simple_graph(10, edges);
}

// the definitional forms the bit tricks have to match
unsigned lcl_loop(CellId a, CellId b) {
  unsigned level = 0;
  while ((a >> level) != (b >> level)) ++level;
  return level;
}

bool lcl_direct(Rank rank, CellId c_p, CellId c_s, CellId c_t) {
  return rank >= std::min(lcl_loop(c_p, c_s), lcl_loop(c_p, c_t));
}

}  // namespace

TEST_CASE("footpath-connected stops collapse into one layout vertex") {
  std::vector<RawTrip> trips = {make_trip({0, 1}, {0, 100})};
  FootpathSet fp = close_footpaths({{0, 1, 60}}, 2);
  Timetable tt = build_timetable(std::vector<Stop>(2), trips, fp, 86400);
  LayoutGraph g = build_layout_graph(tt);
  CHECK(g.num_vertices() == 1);
  CHECK(g.num_edges() == 0);
  CHECK(g.vertex_weight[0] == 2);
  CHECK(g.stop_vertex[0] == g.stop_vertex[1]);
}

TEST_CASE("connection counts become layout edge weights") {
  std::vector<RawTrip> trips = {
      make_trip({0, 1}, {0, 100}),
      make_trip({0, 1}, {200, 300}),
      make_trip({0, 1}, {400, 500}),
      make_trip({1, 2}, {0, 100}),
  };
  Timetable tt = build_timetable(std::vector<Stop>(3), trips, close_footpaths({}, 3), 86400);
  LayoutGraph g = build_layout_graph(tt);
  CHECK(g.num_vertices() == 3);
  CHECK(g.num_edges() == 2);
  std::multiset<std::uint32_t> weights(g.adj_weight.begin(), g.adj_weight.end());
  CHECK(weights == std::multiset<std::uint32_t>{1, 1, 3, 3});
}

TEST_CASE("bisect cuts a path graph in the middle") {
  LayoutGraph g = simple_graph(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}});
  auto verts = all_verts(g);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto side = bisect(g, verts, 0.0, true, seed);
    CHECK(cut_weight(g, verts, side) == 1);
    CHECK(std::count(side.begin(), side.end(), 0) == 2);
  }
}

TEST_CASE("bisect finds the bridge between two cliques") {
  LayoutGraph g = two_cliques_and_a_bridge();
  auto verts = all_verts(g);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto side = bisect(g, verts, 0.25, true, seed);
    CHECK(cut_weight(g, verts, side) == 1);
    // the cut separates exactly the cliques
    for (std::uint32_t v = 1; v < 5; ++v) CHECK(side[v] == side[0]);
    for (std::uint32_t v = 6; v < 10; ++v) CHECK(side[v] == side[5]);
    CHECK(side[0] != side[5]);
  }
}

TEST_CASE("bisect stays within twice the optimum on random graphs") {
  int good = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng(seed);
    const std::uint32_t n = 12;
    std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t a = 0; a < n; ++a)
      for (std::uint32_t b = a + 1; b < n; ++b)
        if (rng.chance(0.3))
          edges.push_back({a, b, static_cast<std::uint32_t>(rng.range(1, 9))});
    LayoutGraph g = simple_graph(n, edges);
    auto verts = all_verts(g);

    // exhaustive optimum over all balanced sides (vertex weights are 1, so
    // balance means 6 vertices per side at imbalance 0.25 with n = 12)
    std::uint64_t best = ~0ull;
    std::uint64_t limit = static_cast<std::uint64_t>((1.0 + 0.25) * n / 2.0);
    for (std::uint32_t mask = 1; mask < (1u << (n - 1)); ++mask) {
      std::vector<std::uint8_t> side(n, 0);
      std::uint32_t ones = 0;
      for (std::uint32_t v = 0; v < n; ++v)
        if (mask & (1u << v)) {
          side[v] = 1;
          ++ones;
        }
      if (ones > limit || n - ones > limit) continue;
      best = std::min(best, cut_weight(g, verts, side));
    }

    auto side = bisect(g, verts, 0.25, true, seed);
    std::uint64_t got = cut_weight(g, verts, side);
    CHECK(got >= best);
    ++total;
    if (got <= 2 * best) ++good;
  }
  CHECK(good * 10 >= total * 9);
}

TEST_CASE("zero levels puts every stop into cell zero") {
  SyntheticSpec spec;
  spec.stops = 30;
  spec.seed = 3;
  Timetable tt = gen_synthetic(spec);
  LayoutGraph g = build_layout_graph(tt);
  NestedPartition part = nested_bipartition(g, tt, 0, 0.25, 1);
  CHECK(part.levels == 0);
  for (CellId c : part.stop_cell) CHECK(c == 0);
  for (CellId c : part.event_cell) CHECK(c == 0);
}

TEST_CASE("one level splits the cliques along the bridge") {
  // timetable whose layout graph is the two-clique network: one line per
  // clique edge plus the bridge connection
  std::vector<RawTrip> trips;
  Time at = 0;
  auto connect = [&](StopId a, StopId b) {
    trips.push_back(make_trip({a, b}, {at, at + 100}));
    at += 200;
  };
  for (StopId a = 0; a < 5; ++a)
    for (StopId b = a + 1; b < 5; ++b) {
      connect(a, b);
      connect(a + 5, b + 5);
    }
  connect(4, 5);
  Timetable tt = build_timetable(std::vector<Stop>(10), trips, close_footpaths({}, 10), 86400);
  LayoutGraph g = build_layout_graph(tt);
  REQUIRE(g.num_vertices() == 10);

  NestedPartition part = nested_bipartition(g, tt, 1, 0.25, 7);
  for (StopId p = 1; p < 5; ++p) CHECK(part.stop_cell[p] == part.stop_cell[0]);
  for (StopId p = 6; p < 10; ++p) CHECK(part.stop_cell[p] == part.stop_cell[5]);
  CHECK(part.stop_cell[0] != part.stop_cell[5]);
}

TEST_CASE("nested cells split into two nonempty children per level") {
  // 8 x 5 grid of stops, one two-stop line per grid edge
  const std::uint32_t w = 8, h = 5;
  std::vector<RawTrip> trips;
  Time at = 0;
  auto connect = [&](StopId a, StopId b) {
    trips.push_back(make_trip({a, b}, {at, at + 100}));
    at += 200;
  };
  for (std::uint32_t y = 0; y < h; ++y)
    for (std::uint32_t x = 0; x < w; ++x) {
      StopId p = y * w + x;
      if (x + 1 < w) connect(p, p + 1);
      if (y + 1 < h) connect(p, p + w);
    }
  Timetable tt =
      build_timetable(std::vector<Stop>(w * h), trips, close_footpaths({}, w * h), 86400);
  LayoutGraph g = build_layout_graph(tt);

  const unsigned levels = 3;
  NestedPartition part = nested_bipartition(g, tt, levels, 0.25, 5);
  for (unsigned level = levels; level-- > 0;) {
    std::map<CellId, std::set<CellId>> children;
    std::map<CellId, std::size_t> weight;
    for (StopId p = 0; p < w * h; ++p) {
      children[part.cell_at(p, level + 1)].insert(part.cell_at(p, level));
      ++weight[part.cell_at(p, level + 1)];
    }
    for (const auto& [parent, kids] : children) {
      // A single-stop cell keeps recursing into one child; anything larger
      // must split in two (the top level may split unevenly, but not trivially).
      CHECK(kids.size() == (weight[parent] >= 2 ? 2u : 1u));
      for (CellId kid : kids) CHECK(static_cast<CellId>(kid >> 1) == parent);
    }
  }
  for (std::size_t e = 0; e < tt.num_events(); ++e)
    CHECK(part.event_cell[e] == part.stop_cell[tt.event_stop[e]]);
}

TEST_CASE("lowest common level of 001 and 011 is 2") {
  CHECK(lcl(0b001, 0b011) == 2);
  CHECK(lcl(0b011, 0b001) == 2);
  CHECK(lcl(5, 5) == 0);
}

TEST_CASE("lcl matches the level walk on random ids") {
  Rng rng(11);
  for (int i = 0; i < 5000; ++i) {
    CellId a = static_cast<CellId>(rng.below(1u << 10));
    CellId b = static_cast<CellId>(rng.below(1u << 10));
    CHECK(lcl(a, b) == lcl_loop(a, b));
  }
}

TEST_CASE("the relax test is permissive at rank K and inside the source cell") {
  Rng rng(13);
  for (int i = 0; i < 2000; ++i) {
    CellId c_s = static_cast<CellId>(rng.below(1u << 6));
    CellId c_t = static_cast<CellId>(rng.below(1u << 6));
    CHECK(lcl_test(0, c_s, c_s, c_t));   // transfer in the source cell
    CHECK(lcl_test(0, c_t, c_s, c_t));   // transfer in the target cell
    CellId c_p = static_cast<CellId>(rng.below(1u << 6));
    CHECK(lcl_test(6, c_p, c_s, c_t));   // max rank passes everywhere
  }
}

TEST_CASE("the shifted relax test equals its definitional form exhaustively") {
  for (Rank rank = 0; rank <= 6; ++rank)
    for (CellId c_p = 0; c_p < (1 << 6); ++c_p)
      for (CellId c_s = 0; c_s < (1 << 6); ++c_s)
        for (CellId c_t = 0; c_t < (1 << 6); ++c_t)
          if (lcl_test(rank, c_p, c_s, c_t) != lcl_direct(rank, c_p, c_s, c_t)) {
            REQUIRE(lcl_test(rank, c_p, c_s, c_t) == lcl_direct(rank, c_p, c_s, c_t));
          }
  CHECK(true);  // reaching this point means all 7 * 2^18 cases agreed
}

TEST_CASE("a partition written to disk imports unchanged") {
  SyntheticSpec spec;
  spec.stops = 40;
  spec.clusters = 2;
  spec.seed = 9;
  Timetable tt = gen_synthetic(spec);
  LayoutGraph g = build_layout_graph(tt);
  NestedPartition part = nested_bipartition(g, tt, 2, 0.25, 1);

  auto path = std::filesystem::temp_directory_path() / "trex_part_test.txt";
  {
    std::ofstream out(path);
    out << "# stop cell\n";
    for (StopId p = 0; p < tt.num_stops(); ++p) out << p << ' ' << part.stop_cell[p] << '\n';
  }
  NestedPartition loaded = import_partition(tt, path.string(), 2);
  CHECK(loaded.stop_cell == part.stop_cell);
  CHECK(loaded.event_cell == part.event_cell);
  std::filesystem::remove(path);
}

TEST_CASE("imports reject cells that cut a footpath") {
  std::vector<RawTrip> trips = {make_trip({0, 1}, {0, 100}), make_trip({1, 2}, {200, 300})};
  FootpathSet fp = close_footpaths({{0, 2, 30}}, 3);
  Timetable tt = build_timetable(std::vector<Stop>(3), trips, fp, 86400);

  auto path = std::filesystem::temp_directory_path() / "trex_part_bad.txt";
  {
    std::ofstream out(path);
    out << "0 0\n1 1\n2 1\n";  // stops 0 and 2 walk to each other
  }
  CHECK_THROWS_WITH_AS(import_partition(tt, path.string(), 1),
                       doctest::Contains("share a footpath"), std::runtime_error);
  std::filesystem::remove(path);
}
