#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "trex/customize.hpp"
#include "trex/partition.hpp"
#include "trex/query.hpp"
#include "trex/refkit.hpp"
#include "trex/snapshot.hpp"
#include "trex/timetable.hpp"
#include "trex/transfers.hpp"

namespace {

using namespace trex;

// "HH:MM:SS" or plain seconds
Time parse_clock(const std::string& s) {
  if (s.find(':') == std::string::npos) return static_cast<Time>(std::stol(s));
  unsigned h = 0, m = 0, sec = 0;
  if (std::sscanf(s.c_str(), "%u:%u:%u", &h, &m, &sec) != 3 || m >= 60 || sec >= 60)
    throw std::invalid_argument("bad time of day '" + s + "', expected HH:MM:SS");
  return static_cast<Time>(h * 3600 + m * 60 + sec);
}

std::string format_clock(Time t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", t / 3600, t / 60 % 60, t % 60);
  return buf;
}

Algo parse_algo(const std::string& name) {
  if (name == "tb") return Algo::kTb;
  if (name == "trex") return Algo::kTrexBasic;
  if (name == "trex-overlay") return Algo::kTrexOverlay;
  throw std::invalid_argument("unknown algorithm '" + name + "', expected tb, trex or trex-overlay");
}

std::uint32_t stages_for(Algo algo) {
  switch (algo) {
    case Algo::kTb:
      return kStagesQuery;
    case Algo::kTrexBasic:
      return kStagesQuery | static_cast<std::uint32_t>(Stage::kPartition) |
             static_cast<std::uint32_t>(Stage::kRanks);
    case Algo::kTrexOverlay:
      return kStagesOverlayQuery;
  }
  return kStagesQuery;
}

QueryEngine make_engine(const EngineState& st) {
  return QueryEngine(st.tt, st.transfers,
                     st.has(Stage::kPartition) ? &st.partition : nullptr,
                     st.has(Stage::kOverlays) ? &st.overlays : nullptr,
                     st.has(Stage::kSuccessor) ? &st.successor : nullptr);
}

void check_stop(const Timetable& tt, StopId p, const char* what) {
  if (p >= tt.num_stops())
    throw std::invalid_argument(std::string(what) + " stop " + std::to_string(p) +
                                " out of range, timetable has " +
                                std::to_string(tt.num_stops()) + " stops");
}

nlohmann::json front_json(const std::vector<FrontEntry>& front) {
  nlohmann::json arr = nlohmann::json::array();
  for (const FrontEntry& f : front) arr.push_back({{"arrival", f.arrival}, {"trips", f.trips}});
  return arr;
}

void print_journey(const Timetable& tt, const Journey& j) {
  if (j.legs.empty()) {
    std::printf("  walk only\n");
    return;
  }
  for (const JourneyLeg& leg : j.legs) {
    EventId a = tt.event_at(leg.trip, leg.enter);
    EventId b = tt.event_at(leg.trip, leg.exit);
    std::printf("  trip %u: stop %u dep %s -> stop %u arr %s\n", leg.trip, tt.event_stop[a],
                format_clock(tt.dep[a]).c_str(), tt.event_stop[b],
                format_clock(tt.arr[b]).c_str());
  }
}

int cmd_query(const std::string& in, StopId from, StopId to, const std::string& dep_s,
              const std::string& algo_s, bool as_json) {
  Algo algo = parse_algo(algo_s);
  EngineState st = load_snapshot(in, stages_for(algo));
  check_stop(st.tt, from, "source");
  check_stop(st.tt, to, "target");
  Time dep = parse_clock(dep_s);
  QueryEngine eng = make_engine(st);
  QueryResult res = eng.run(from, to, dep, algo);

  if (as_json) {
    nlohmann::json legs_all = nlohmann::json::array();
    for (const Journey& j : res.journeys) {
      nlohmann::json legs = nlohmann::json::array();
      for (const JourneyLeg& leg : j.legs)
        legs.push_back({{"trip", leg.trip}, {"enter", leg.enter}, {"exit", leg.exit}});
      legs_all.push_back(std::move(legs));
    }
    nlohmann::json out = {{"front", front_json(res.front)},
                          {"journeys", std::move(legs_all)},
                          {"metrics",
                           {{"scanned_segments", res.metrics.scanned_segments},
                            {"relaxed_transfers", res.metrics.relaxed_transfers},
                            {"skipped_transfers", res.metrics.skipped_transfers},
                            {"rounds", res.metrics.rounds},
                            {"unpack_micros", res.metrics.unpack_micros}}}};
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
  }

  if (res.front.empty()) {
    std::printf("no journey from %u to %u departing %s\n", from, to, format_clock(dep).c_str());
  } else {
    for (std::size_t i = 0; i < res.front.size(); ++i) {
      std::printf("arrival %s with %u trips\n", format_clock(res.front[i].arrival).c_str(),
                  res.front[i].trips);
      if (i < res.journeys.size()) print_journey(st.tt, res.journeys[i]);
    }
  }
  std::printf("scanned %llu segments, relaxed %llu transfers, skipped %llu, %u rounds\n",
              static_cast<unsigned long long>(res.metrics.scanned_segments),
              static_cast<unsigned long long>(res.metrics.relaxed_transfers),
              static_cast<unsigned long long>(res.metrics.skipped_transfers),
              res.metrics.rounds);
  return 0;
}

int cmd_profile(const std::string& in, StopId from, StopId to, const std::string& start_s,
                const std::string& end_s, const std::string& algo_s, bool as_json) {
  Algo algo = parse_algo(algo_s);
  EngineState st = load_snapshot(in, stages_for(algo));
  check_stop(st.tt, from, "source");
  check_stop(st.tt, to, "target");
  Time start = parse_clock(start_s), end = parse_clock(end_s);
  QueryEngine eng = make_engine(st);
  std::vector<ProfileEntry> prof = eng.profile(from, to, start, end, algo);

  if (as_json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ProfileEntry& p : prof)
      arr.push_back({{"departure", p.departure}, {"arrival", p.arrival}, {"trips", p.trips}});
    std::printf("%s\n", nlohmann::json{{"profile", std::move(arr)}}.dump(2).c_str());
    return 0;
  }
  for (const ProfileEntry& p : prof)
    std::printf("dep %s arrival %s with %u trips\n", format_clock(p.departure).c_str(),
                format_clock(p.arrival).c_str(), p.trips);
  if (prof.empty()) std::printf("no journey in window\n");
  return 0;
}

// distance-ranked target: the 2^r-th closest stop by straight-line distance
struct GeoRanker {
  std::vector<std::vector<StopId>> order;  // per source, stops sorted by distance

  explicit GeoRanker(const Timetable& tt) {
    order.resize(tt.num_stops());
    std::vector<StopId> ids(tt.num_stops());
    for (StopId p = 0; p < ids.size(); ++p) ids[p] = p;
    for (StopId s = 0; s < tt.num_stops(); ++s) {
      order[s] = ids;
      const Stop& a = tt.stops[s];
      std::sort(order[s].begin(), order[s].end(), [&](StopId x, StopId y) {
        const Stop &px = tt.stops[x], &py = tt.stops[y];
        double dx = (px.lat - a.lat) * (px.lat - a.lat) + (px.lon - a.lon) * (px.lon - a.lon);
        double dy = (py.lat - a.lat) * (py.lat - a.lat) + (py.lon - a.lon) * (py.lon - a.lon);
        if (dx != dy) return dx < dy;
        return x < y;
      });
    }
  }
};

int cmd_bench(const std::string& in, std::uint32_t queries, std::uint64_t seed,
              const std::string& algos_s, bool georank, const std::string& csv_path,
              bool no_verify) {
  std::vector<Algo> algos;
  std::uint32_t required = 0;
  std::string rest = algos_s;
  while (!rest.empty()) {
    std::size_t comma = rest.find(',');
    algos.push_back(parse_algo(rest.substr(0, comma)));
    required |= stages_for(algos.back());
    rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
  }
  if (algos.empty()) throw std::invalid_argument("--algos needs at least one algorithm");

  EngineState st = load_snapshot(in, required);
  QueryEngine eng = make_engine(st);
  std::size_t stops = st.tt.num_stops();
  if (stops < 2) throw std::invalid_argument("timetable has fewer than two stops");

  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << "query,source,target,departure,algorithm,pareto,scanned_segments,"
         "relaxed_transfers,rounds,elapsed_us,unpack_us\n";

  const char* names[] = {"tb", "trex", "trex-overlay"};
  GeoRanker* ranker = nullptr;
  GeoRanker ranker_store(georank ? st.tt : Timetable{});
  if (georank) ranker = &ranker_store;
  unsigned rank_max = 0;
  while ((2u << rank_max) < stops) ++rank_max;  // 2^rank_max stays a valid rank

  std::mt19937_64 rng(seed);
  std::uint64_t mismatches = 0;
  for (std::uint32_t q = 0; q < queries; ++q) {
    StopId from = static_cast<StopId>(rng() % stops);
    StopId to;
    if (georank) {
      unsigned r = static_cast<unsigned>(rng() % (rank_max + 1));
      to = ranker->order[from][std::min<std::size_t>(1u << r, stops - 1)];
    } else {
      to = static_cast<StopId>(rng() % stops);
    }
    Time dep = static_cast<Time>(rng() % 86400);

    std::vector<FrontEntry> reference;
    for (std::size_t a = 0; a < algos.size(); ++a) {
      auto t0 = std::chrono::steady_clock::now();
      QueryResult res = eng.run(from, to, dep, algos[a]);
      auto t1 = std::chrono::steady_clock::now();
      std::uint64_t total =
          std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
      std::uint64_t unpack = res.metrics.unpack_micros;
      csv << q << ',' << from << ',' << to << ',' << dep << ','
          << names[static_cast<int>(algos[a])] << ',' << res.front.size() << ','
          << res.metrics.scanned_segments << ',' << res.metrics.relaxed_transfers << ','
          << res.metrics.rounds << ',' << (total > unpack ? total - unpack : 0) << ','
          << unpack << '\n';
      if (a == 0)
        reference = std::move(res.front);
      else if (!no_verify && res.front != reference)
        ++mismatches;
    }
    if (mismatches) {
      std::fprintf(stderr, "front mismatch between algorithms on query %u (%u -> %u dep %d)\n",
                   q, from, to, dep);
      return 1;
    }
  }
  std::printf("%u queries x %zu algorithms -> %s\n", queries, algos.size(), csv_path.c_str());
  return 0;
}

int cmd_stats(const std::string& in) {
  EngineState st = load_snapshot(in, static_cast<std::uint32_t>(Stage::kTimetable));
  const Timetable& tt = st.tt;
  std::printf("stops              %zu\n", tt.num_stops());
  std::printf("footpaths          %zu (incl. self loops)\n", tt.footpaths.size());
  std::printf("lines              %zu\n", tt.num_lines());
  std::printf("trips              %zu\n", tt.num_trips());
  std::printf("events             %zu\n", tt.num_events());
  std::printf("service period     %s\n", format_clock(tt.period).c_str());
  if (st.has(Stage::kTransfers)) std::printf("transfers          %zu\n", st.transfers.size());
  if (st.has(Stage::kPartition))
    std::printf("partition          %u levels, imbalance %.2f\n", st.partition.levels,
                st.partition.imbalance);
  if (st.has(Stage::kRanks) && st.has(Stage::kPartition)) {
    std::vector<std::size_t> hist(st.partition.levels + 1, 0);
    for (Rank r : st.transfers.rank) ++hist[r];
    std::printf("rank histogram    ");
    for (std::size_t h : hist) std::printf(" %zu", h);
    std::printf("\n");
  }
  if (st.has(Stage::kOverlays)) {
    std::printf("overlay sizes     ");
    for (unsigned l = 0; l < st.overlays.levels; ++l)
      std::printf(" %zu", st.overlays.size(l));
    std::printf("\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trip-based transit router with multilevel overlay acceleration"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "read a GTFS feed into a snapshot");
  std::string gtfs_dir, day, out_path;
  int days = 1;
  std::string buffer = "0";
  ingest->add_option("--gtfs", gtfs_dir, "GTFS directory")->required();
  ingest->add_option("--day", day, "service day, YYYYMMDD")->required();
  ingest->add_option("--days", days, "number of consecutive days (1 or 2)");
  ingest->add_option("--buffer", buffer, "departure buffer, seconds or HH:MM:SS");
  ingest->add_option("--out", out_path, "snapshot to write")->required();

  auto* gen = app.add_subcommand("gen", "generate a synthetic clustered instance");
  SyntheticSpec spec;
  gen->add_option("--stops", spec.stops, "number of stops");
  gen->add_option("--clusters", spec.clusters, "number of clusters");
  gen->add_option("--lines", spec.lines, "number of lines");
  gen->add_option("--trips-per-line", spec.trips_per_line, "trips per line");
  gen->add_option("--inter", spec.inter_fraction, "share of extra lines linking cluster hubs");
  gen->add_option("--footpath-density", spec.footpath_density, "footpaths per stop inside a cluster");
  gen->add_option("--horizon", spec.horizon, "service period in seconds");
  gen->add_option("--seed", spec.seed, "generator seed");
  gen->add_option("--out", out_path, "snapshot to write")->required();

  auto* transfers = app.add_subcommand("transfers", "compute and prune the transfer set");
  std::string in_path;
  transfers->add_option("--in", in_path, "snapshot to update")->required();

  auto* partition = app.add_subcommand("partition", "nested bipartition of the stop layout");
  unsigned levels = 4;
  double imbalance = 0.25;
  std::uint64_t part_seed = 1;
  std::string import_path;
  partition->add_option("--in", in_path, "snapshot to update")->required();
  partition->add_option("--levels", levels, "partition depth")->required();
  partition->add_option("--imbalance", imbalance, "balance slack per split");
  partition->add_option("--seed", part_seed, "partitioner seed");
  partition->add_option("--import", import_path, "read 'stop cell' lines instead of computing");

  auto* customize = app.add_subcommand("customize", "rank transfers and build overlays");
  unsigned threads = 1;
  customize->add_option("--in", in_path, "snapshot to update")->required();
  customize->add_option("--threads", threads, "worker threads");

  auto* query = app.add_subcommand("query", "earliest-arrival query");
  StopId from = 0, to = 0;
  std::string dep_s, algo_s = "tb";
  bool as_json = false;
  query->add_option("--in", in_path, "snapshot to read")->required();
  query->add_option("--from", from, "source stop id")->required();
  query->add_option("--to", to, "target stop id")->required();
  query->add_option("--dep", dep_s, "departure, HH:MM:SS")->required();
  query->add_option("--algo", algo_s, "tb, trex or trex-overlay");
  query->add_flag("--json", as_json, "machine-readable output");

  auto* profile = app.add_subcommand("profile", "all departures in a window");
  std::string start_s, end_s;
  profile->add_option("--in", in_path, "snapshot to read")->required();
  profile->add_option("--from", from, "source stop id")->required();
  profile->add_option("--to", to, "target stop id")->required();
  profile->add_option("--start", start_s, "window start, HH:MM:SS")->required();
  profile->add_option("--end", end_s, "window end, HH:MM:SS")->required();
  profile->add_option("--algo", algo_s, "tb, trex or trex-overlay");
  profile->add_flag("--json", as_json, "machine-readable output");

  auto* bench = app.add_subcommand("bench", "random query workload, metrics as CSV");
  std::uint32_t queries = 1000;
  std::uint64_t bench_seed = 1;
  std::string algos_s = "tb", csv_path;
  bool georank = false, no_verify = false;
  bench->add_option("--in", in_path, "snapshot to read")->required();
  bench->add_option("--queries", queries, "number of queries");
  bench->add_option("--seed", bench_seed, "workload seed");
  bench->add_option("--algos", algos_s, "comma-separated: tb,trex,trex-overlay");
  bench->add_flag("--georank", georank, "targets at power-of-two distance ranks");
  bench->add_option("--csv", csv_path, "output file")->required();
  bench->add_flag("--no-verify", no_verify, "skip cross-algorithm front comparison");

  auto* stats = app.add_subcommand("stats", "print snapshot counters");
  stats->add_option("--in", in_path, "snapshot to read")->required();

  try {
    app.parse(argc, argv);

    if (*ingest) {
      GtfsOptions opt;
      opt.dir = gtfs_dir;
      opt.service_day = day;
      opt.day_count = days;
      opt.buffer = parse_clock(buffer);
      EngineState st;
      st.tt = load_gtfs(opt);
      st.mark(Stage::kTimetable);
      save_snapshot(out_path, st);
      std::printf("%zu stops, %zu trips, %zu events -> %s\n", st.tt.num_stops(),
                  st.tt.num_trips(), st.tt.num_events(), out_path.c_str());
    } else if (*gen) {
      EngineState st;
      st.tt = gen_synthetic(spec);
      st.mark(Stage::kTimetable);
      save_snapshot(out_path, st);
      std::printf("%zu stops, %zu trips, %zu events -> %s\n", st.tt.num_stops(),
                  st.tt.num_trips(), st.tt.num_events(), out_path.c_str());
    } else if (*transfers) {
      EngineState st = load_snapshot(in_path, static_cast<std::uint32_t>(Stage::kTimetable));
      st.transfers = generate_transfers(st.tt);
      prune_uturn(st.tt, st.transfers);
      prune_latest_exit(st.tt, st.transfers);
      // later stages describe the old transfer set; they are gone now
      st.stages = static_cast<std::uint32_t>(Stage::kTimetable) |
                  static_cast<std::uint32_t>(Stage::kTransfers);
      save_snapshot(in_path, st);
      std::printf("%zu transfers\n", st.transfers.size());
    } else if (*partition) {
      EngineState st = load_snapshot(in_path, static_cast<std::uint32_t>(Stage::kTimetable));
      st.partition = import_path.empty()
                         ? nested_bipartition(build_layout_graph(st.tt), st.tt, levels,
                                              imbalance, part_seed)
                         : import_partition(st.tt, import_path, levels);
      st.stages &= static_cast<std::uint32_t>(Stage::kTimetable) |
                   static_cast<std::uint32_t>(Stage::kTransfers);
      st.mark(Stage::kPartition);
      save_snapshot(in_path, st);
      std::printf("%u levels over %zu stops\n", st.partition.levels, st.tt.num_stops());
    } else if (*customize) {
      EngineState st = load_snapshot(in_path, kStagesQuery |
                                                  static_cast<std::uint32_t>(Stage::kPartition));
      trex::customize(st.tt, st.transfers, st.partition, threads);
      st.overlays = build_overlays(st.tt, st.transfers, st.partition.levels);
      st.successor = build_successor_table(st.tt, st.partition);
      st.mark(Stage::kRanks);
      st.mark(Stage::kOverlays);
      st.mark(Stage::kSuccessor);
      save_snapshot(in_path, st);
      std::size_t ranked = 0;
      for (Rank r : st.transfers.rank) ranked += r > 0;
      std::printf("%zu of %zu transfers ranked above zero\n", ranked, st.transfers.size());
    } else if (*query) {
      return cmd_query(in_path, from, to, dep_s, algo_s, as_json);
    } else if (*profile) {
      return cmd_profile(in_path, from, to, start_s, end_s, algo_s, as_json);
    } else if (*bench) {
      return cmd_bench(in_path, queries, bench_seed, algos_s, georank, csv_path, no_verify);
    } else if (*stats) {
      return cmd_stats(in_path);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "trex: %s\n", e.what());
    return 1;
  }
  return 0;
}
