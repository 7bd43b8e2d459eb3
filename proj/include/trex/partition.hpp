#pragma once

#include <bit>
#include <string>
#include <vector>

#include "timetable.hpp"
#include "types.hpp"

namespace trex {

// Footpath-connected stop components contracted to weighted vertices; an edge
// connects two vertices when at least one trip runs a connection between them.
struct LayoutGraph {
  std::vector<std::uint32_t> stop_vertex;     // per stop
  std::vector<std::uint32_t> vertex_weight;   // number of stops
  std::vector<std::uint32_t> adj_begin;       // size |V|+1
  std::vector<std::uint32_t> adj_vertex;
  std::vector<std::uint32_t> adj_weight;      // number of connections

  std::size_t num_vertices() const { return vertex_weight.size(); }
  std::size_t num_edges() const { return adj_vertex.size() / 2; }
};

LayoutGraph build_layout_graph(const Timetable& tt);

// Nested bipartition with `levels` levels. A stop's cell id has one bit per
// level, the top-level split in the most significant bit; the cell of a stop
// at level l is stop_cell >> l.
struct NestedPartition {
  std::uint32_t levels = 0;
  double imbalance = 0.0;
  std::vector<CellId> stop_cell;
  std::vector<CellId> event_cell;

  CellId cell_at(StopId p, unsigned level) const {
    return static_cast<CellId>(stop_cell[p] >> level);
  }
  CellId event_cell_at(EventId e, unsigned level) const {
    return static_cast<CellId>(event_cell[e] >> level);
  }
};

// Splits the induced subgraph on `verts` into two sides (result[i] is the side
// of verts[i]). Region growing from a pseudo-peripheral vertex, refined with
// boundary Fiduccia-Mattheyses passes. Deterministic for a fixed seed.
std::vector<std::uint8_t> bisect(const LayoutGraph& g, const std::vector<std::uint32_t>& verts,
                                 double imbalance, bool enforce_balance, std::uint64_t seed);

NestedPartition nested_bipartition(const LayoutGraph& g, const Timetable& tt, unsigned levels,
                                   double imbalance, std::uint64_t seed);

// Reads "stopId cellId" lines; validates footpath-connected stops share cells.
NestedPartition import_partition(const Timetable& tt, const std::string& path,
                                 unsigned levels);

// number of the lowest level whose cells still separate the two ids
inline unsigned lcl(CellId a, CellId b) {
  return static_cast<unsigned>(std::bit_width(static_cast<unsigned>(a ^ b)));
}

// true when a transfer of this rank at a stop with cell c_p has to be relaxed
// for a query between cells c_s and c_t
inline bool lcl_test(Rank rank, CellId c_p, CellId c_s, CellId c_t) {
  return ((static_cast<unsigned>(c_p ^ c_s) >> rank) == 0) ||
         ((static_cast<unsigned>(c_p ^ c_t) >> rank) == 0);
}

}  // namespace trex
