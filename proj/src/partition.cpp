#include "trex/partition.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "trex/util.hpp"

namespace trex {

LayoutGraph build_layout_graph(const Timetable& tt) {
  std::size_t stops = tt.num_stops();
  LayoutGraph g;
  g.stop_vertex.assign(stops, kInvalid);

  // footpath components become vertices, numbered by first stop
  std::uint32_t nv = 0;
  for (StopId p = 0; p < stops; ++p) {
    if (g.stop_vertex[p] != kInvalid) continue;
    std::vector<StopId> queue = {p};
    g.stop_vertex[p] = nv;
    while (!queue.empty()) {
      StopId q = queue.back();
      queue.pop_back();
      for (std::uint32_t i = tt.footpaths.begin(q); i < tt.footpaths.end(q); ++i) {
        StopId r = tt.footpaths.target[i];
        if (g.stop_vertex[r] == kInvalid) {
          g.stop_vertex[r] = nv;
          queue.push_back(r);
        }
      }
    }
    ++nv;
  }

  g.vertex_weight.assign(nv, 0);
  for (StopId p = 0; p < stops; ++p) ++g.vertex_weight[g.stop_vertex[p]];

  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> edges;
  for (TripId t = 0; t < tt.num_trips(); ++t)
    for (std::uint32_t i = 0; i + 1 < tt.trip_length(t); ++i) {
      std::uint32_t u = g.stop_vertex[tt.event_stop[tt.event_at(t, i)]];
      std::uint32_t v = g.stop_vertex[tt.event_stop[tt.event_at(t, i + 1)]];
      if (u == v) continue;
      ++edges[{std::min(u, v), std::max(u, v)}];
    }

  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> adj(nv);
  for (const auto& [uv, w] : edges) {
    adj[uv.first].emplace_back(uv.second, w);
    adj[uv.second].emplace_back(uv.first, w);
  }
  g.adj_begin.assign(nv + 1, 0);
  for (std::uint32_t v = 0; v < nv; ++v) {
    std::sort(adj[v].begin(), adj[v].end());
    g.adj_begin[v + 1] = g.adj_begin[v] + static_cast<std::uint32_t>(adj[v].size());
    for (const auto& [u, w] : adj[v]) {
      g.adj_vertex.push_back(u);
      g.adj_weight.push_back(w);
    }
  }
  return g;
}

namespace {

struct SubGraph {
  std::vector<std::uint32_t> verts;                 // global ids
  std::vector<std::uint32_t> weight;                // per local vertex
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> adj;  // local
  std::uint64_t total = 0;
};

SubGraph induce(const LayoutGraph& g, const std::vector<std::uint32_t>& verts) {
  SubGraph s;
  s.verts = verts;
  std::map<std::uint32_t, std::uint32_t> local;
  for (std::uint32_t i = 0; i < verts.size(); ++i) local[verts[i]] = i;
  s.weight.resize(verts.size());
  s.adj.resize(verts.size());
  for (std::uint32_t i = 0; i < verts.size(); ++i) {
    std::uint32_t v = verts[i];
    s.weight[i] = g.vertex_weight[v];
    s.total += s.weight[i];
    for (std::uint32_t a = g.adj_begin[v]; a < g.adj_begin[v + 1]; ++a) {
      auto it = local.find(g.adj_vertex[a]);
      if (it != local.end()) s.adj[i].emplace_back(it->second, g.adj_weight[a]);
    }
  }
  return s;
}

std::uint32_t pseudo_peripheral(const SubGraph& s, std::uint32_t start) {
  std::uint32_t cur = start;
  for (int sweep = 0; sweep < 2; ++sweep) {
    std::vector<int> dist(s.verts.size(), -1);
    std::vector<std::uint32_t> queue = {cur};
    dist[cur] = 0;
    std::uint32_t far = cur;
    for (std::size_t h = 0; h < queue.size(); ++h) {
      std::uint32_t v = queue[h];
      for (const auto& [u, w] : s.adj[v])
        if (dist[u] < 0) {
          dist[u] = dist[v] + 1;
          queue.push_back(u);
          if (dist[u] > dist[far] || (dist[u] == dist[far] && u < far)) far = u;
        }
    }
    cur = far;
  }
  return cur;
}

}  // namespace

std::vector<std::uint8_t> bisect(const LayoutGraph& g, const std::vector<std::uint32_t>& verts,
                                 double imbalance, bool enforce_balance, std::uint64_t seed) {
  std::size_t n = verts.size();
  std::vector<std::uint8_t> side(n, 1);
  if (n == 0) return side;
  if (n == 1) {
    side[0] = 0;
    return side;
  }

  SubGraph s = induce(g, verts);
  Rng rng(seed);
  double bound_d = (1.0 + imbalance) * static_cast<double>(s.total) / 2.0;
  std::uint64_t bound = enforce_balance ? static_cast<std::uint64_t>(bound_d)
                                        : s.total;  // only non-empty sides required

  // greedy region growing from a pseudo-peripheral vertex
  std::uint32_t u = pseudo_peripheral(s, static_cast<std::uint32_t>(rng.below(n)));
  std::vector<std::int64_t> link(n, 0);  // edge weight towards side 0
  std::uint64_t w0 = 0;
  std::size_t assigned = 0;
  auto add = [&](std::uint32_t v) {
    side[v] = 0;
    w0 += s.weight[v];
    ++assigned;
    link[v] = -1;
    for (const auto& [x, w] : s.adj[v])
      if (side[x] == 1) link[x] += w;
  };
  add(u);
  while (2 * w0 < s.total && assigned + 1 < n) {
    std::uint32_t pick = kInvalid;
    for (std::uint32_t v = 0; v < n; ++v)
      if (side[v] == 1 && link[v] > 0 &&
          (pick == kInvalid || link[v] > link[pick] || (link[v] == link[pick] && v < pick)))
        pick = v;
    if (pick == kInvalid) {  // disconnected: seed the next component
      for (std::uint32_t v = 0; v < n; ++v)
        if (side[v] == 1 && (pick == kInvalid || s.weight[v] > s.weight[pick])) pick = v;
    }
    add(pick);
  }

  // boundary Fiduccia-Mattheyses refinement
  std::uint64_t w[2] = {w0, s.total - w0};
  auto gain_of = [&](std::uint32_t v) {
    std::int64_t gain = 0;
    for (const auto& [x, w_] : s.adj[v]) gain += side[x] != side[v] ? w_ : -std::int64_t(w_);
    return gain;
  };
  auto boundary = [&](std::uint32_t v) {
    for (const auto& [x, w_] : s.adj[v])
      if (side[x] != side[v]) return true;
    return false;
  };

  for (int pass = 0; pass < 10; ++pass) {
    std::map<std::int64_t, std::set<std::uint32_t>> bucket;
    std::vector<std::int64_t> gain(n);
    std::vector<bool> locked(n, false), queued(n, false);
    for (std::uint32_t v = 0; v < n; ++v)
      if (boundary(v)) {
        gain[v] = gain_of(v);
        bucket[gain[v]].insert(v);
        queued[v] = true;
      }

    std::vector<std::uint32_t> moves;
    std::int64_t cut_delta = 0, best_delta = 0;
    std::size_t best_len = 0;
    std::uint64_t count[2] = {0, 0};
    for (std::uint32_t v = 0; v < n; ++v) ++count[side[v]];

    while (!bucket.empty()) {
      std::uint32_t pick = kInvalid;
      for (auto it = bucket.rbegin(); it != bucket.rend() && pick == kInvalid; ++it)
        for (std::uint32_t v : it->second) {
          int from = side[v], to = 1 - from;
          if (count[from] <= 1) continue;
          if (w[to] + s.weight[v] > bound && w[to] + s.weight[v] >= w[from]) continue;
          pick = v;
          break;
        }
      if (pick == kInvalid) break;
      bucket[gain[pick]].erase(pick);
      if (bucket[gain[pick]].empty()) bucket.erase(gain[pick]);
      int from = side[pick], to = 1 - from;
      side[pick] = static_cast<std::uint8_t>(to);
      w[from] -= s.weight[pick];
      w[to] += s.weight[pick];
      --count[from];
      ++count[to];
      locked[pick] = true;
      queued[pick] = false;
      cut_delta -= gain[pick];
      moves.push_back(pick);
      if (cut_delta < best_delta) {
        best_delta = cut_delta;
        best_len = moves.size();
      }
      for (const auto& [x, w_] : s.adj[pick]) {
        if (locked[x]) continue;
        if (queued[x]) {
          bucket[gain[x]].erase(x);
          if (bucket[gain[x]].empty()) bucket.erase(gain[x]);
          queued[x] = false;
        }
        if (boundary(x)) {
          gain[x] = gain_of(x);
          bucket[gain[x]].insert(x);
          queued[x] = true;
        }
      }
    }

    for (std::size_t i = moves.size(); i > best_len; --i) {  // undo past the best prefix
      std::uint32_t v = moves[i - 1];
      int from = side[v];
      side[v] = static_cast<std::uint8_t>(1 - from);
      w[from] -= s.weight[v];
      w[1 - from] += s.weight[v];
    }
    if (best_len == 0) break;
  }
  return side;
}

namespace {

void split_cell(const LayoutGraph& g, std::vector<CellId>& cell,
                const std::vector<std::uint32_t>& verts, unsigned remaining, bool top,
                double imbalance, std::uint64_t seed, std::uint32_t prefix) {
  if (remaining == 0 || verts.empty()) return;
  auto sides = bisect(g, verts, imbalance, !top, mix_seed(seed, prefix));
  std::vector<std::uint32_t> a, b;
  for (std::uint32_t i = 0; i < verts.size(); ++i)
    (sides[i] == 0 ? a : b).push_back(verts[i]);
  std::uint32_t bit = 1u << (remaining - 1);
  for (std::uint32_t v : b) cell[v] = static_cast<CellId>(cell[v] | bit);
  split_cell(g, cell, a, remaining - 1, false, imbalance, seed, prefix << 1);
  split_cell(g, cell, b, remaining - 1, false, imbalance, seed, (prefix << 1) | 1);
}

}  // namespace

NestedPartition nested_bipartition(const LayoutGraph& g, const Timetable& tt, unsigned levels,
                                   double imbalance, std::uint64_t seed) {
  if (levels > 16) throw std::runtime_error("at most 16 partition levels are supported");
  std::vector<CellId> cell(g.num_vertices(), 0);
  std::vector<std::uint32_t> all(g.num_vertices());
  std::iota(all.begin(), all.end(), 0u);
  split_cell(g, cell, all, levels, true, imbalance, seed, 1);

  NestedPartition part;
  part.levels = levels;
  part.imbalance = imbalance;
  part.stop_cell.resize(tt.num_stops());
  for (StopId p = 0; p < tt.num_stops(); ++p) part.stop_cell[p] = cell[g.stop_vertex[p]];
  part.event_cell.resize(tt.num_events());
  for (std::size_t e = 0; e < tt.num_events(); ++e)
    part.event_cell[e] = part.stop_cell[tt.event_stop[e]];
  return part;
}

NestedPartition import_partition(const Timetable& tt, const std::string& path,
                                 unsigned levels) {
  if (levels > 16) throw std::runtime_error("at most 16 partition levels are supported");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open partition file " + path);
  NestedPartition part;
  part.levels = levels;
  part.stop_cell.assign(tt.num_stops(), 0);
  std::vector<bool> seen(tt.num_stops(), false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::uint64_t stop, cell;
    if (!(row >> stop >> cell))
      throw std::runtime_error("bad partition line: " + line);
    if (stop >= tt.num_stops())
      throw std::runtime_error("partition names unknown stop " + std::to_string(stop));
    if (cell >= (1ull << levels))
      throw std::runtime_error("cell id " + std::to_string(cell) + " needs more than " +
                               std::to_string(levels) + " levels");
    part.stop_cell[stop] = static_cast<CellId>(cell);
    seen[stop] = true;
  }
  for (StopId p = 0; p < tt.num_stops(); ++p)
    if (!seen[p]) throw std::runtime_error("partition misses stop " + std::to_string(p));
  for (StopId p = 0; p < tt.num_stops(); ++p)
    for (std::uint32_t i = tt.footpaths.begin(p); i < tt.footpaths.end(p); ++i)
      if (part.stop_cell[p] != part.stop_cell[tt.footpaths.target[i]])
        throw std::runtime_error("stops " + std::to_string(p) + " and " +
                                 std::to_string(tt.footpaths.target[i]) +
                                 " share a footpath but not a cell");
  part.event_cell.resize(tt.num_events());
  for (std::size_t e = 0; e < tt.num_events(); ++e)
    part.event_cell[e] = part.stop_cell[tt.event_stop[e]];
  return part;
}

}  // namespace trex
