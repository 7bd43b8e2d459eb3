#pragma once

#include <cstdint>
#include <vector>

#include "trex/customize.hpp"
#include "trex/detail/search.hpp"
#include "trex/partition.hpp"
#include "trex/timetable.hpp"
#include "trex/transfers.hpp"
#include "trex/types.hpp"

namespace trex {

struct FrontEntry {
  Time arrival;
  std::uint32_t trips;
  bool operator==(const FrontEntry&) const = default;
};

struct ProfileEntry {
  Time departure;
  Time arrival;
  std::uint32_t trips;
  bool operator==(const ProfileEntry&) const = default;
};

struct JourneyLeg {
  TripId trip;
  std::uint32_t enter, exit;  // stop indices within the trip
};

// Walk to the first boarding stop, ride trips linked by one transfer each,
// walk to the target. No legs means the journey is a single walk.
struct Journey {
  StopId from = 0, to = 0;
  Time departure = 0, arrival = 0;
  std::vector<JourneyLeg> legs;
};

struct QueryMetrics {
  std::uint64_t scanned_segments = 0;
  std::uint64_t relaxed_transfers = 0;
  std::uint64_t skipped_transfers = 0;  // rejected by the cell test
  std::uint32_t rounds = 0;
  std::uint64_t unpack_micros = 0;
};

enum class Algo { kTb, kTrexBasic, kTrexOverlay };

struct QueryResult {
  std::vector<FrontEntry> front;  // trips ascending, arrivals strictly descending
  std::vector<Journey> journeys;  // parallel to front when unpacking was requested
  QueryMetrics metrics;
};

// Holds the reusable search state of one worker. Queries on one instance run
// sequentially; for concurrency give each worker its own instance, the shared
// inputs are never written.
class QueryEngine {
 public:
  // kTb needs neither partition nor overlays, kTrexBasic needs the partition,
  // kTrexOverlay additionally the overlays and the successor table.
  QueryEngine(const Timetable& tt, const TransferSet& ts, const NestedPartition* part = nullptr,
              const TransferOverlays* overlays = nullptr, const SuccessorTable* succ = nullptr);

  QueryResult run(StopId from, StopId to, Time dep, Algo algo, bool with_journeys = true);

  // Union of the fronts over every candidate departure in [start, end], each
  // entry annotated with the latest departure attaining it. Runs descending
  // and shares the pruning state between runs.
  std::vector<ProfileEntry> profile(StopId from, StopId to, Time start, Time end, Algo algo);

 private:
  struct Label {
    Time arrival;
    std::uint32_t round;
    std::uint32_t pos;   // segment position within the round, kInvalid for walks
    std::uint32_t exit;  // exit index that reached the target, kInvalid for walks
  };
  struct Piece {  // subsegment produced by splitting at cell boundaries
    std::uint32_t pos;         // position of the full segment in its round
    std::uint32_t first, end;  // exit index range, inclusive
    std::uint8_t level;
    bool target;  // anchored inside the target's base cell
    bool skip;
  };

  void prepare(StopId from, StopId to, Algo algo);
  void exec(Time dep, QueryMetrics& m);
  void init_round_one(Time dep);
  void scan_plain(unsigned n, QueryMetrics& m);
  void scan_overlay(unsigned n, QueryMetrics& m);
  void split(const detail::Segment& seg, std::uint32_t pos, std::vector<Piece>& out) const;
  void insert_label(Time arrival, unsigned round, std::uint32_t pos, std::uint32_t exit);
  std::uint8_t entry_level(StopId at) const;
  std::uint32_t parent_exit(const detail::Segment& par, EventId entered) const;
  Journey unpack(const Label& l) const;
  void harvest(std::uint32_t last[]) const;

  const Timetable& tt_;
  const TransferSet& ts_;
  const NestedPartition* part_;
  const TransferOverlays* ov_;
  const SuccessorTable* succ_;

  detail::RoundReachedStore reached_;
  std::vector<std::vector<detail::Segment>> rounds_;
  std::vector<Piece> pieces_;
  Time min_arr_[detail::kMaxRounds + 1];
  std::vector<Label> labels_;

  StopId from_ = 0, to_ = 0;
  Time dep_ = 0;
  Algo algo_ = Algo::kTb;
  CellId cell_from_ = 0, cell_to_ = 0;
};

QueryResult tb_query(const Timetable& tt, const TransferSet& ts, StopId from, StopId to, Time dep,
                     bool with_journeys = true);
QueryResult trex_query_basic(const Timetable& tt, const TransferSet& ts,
                             const NestedPartition& part, StopId from, StopId to, Time dep,
                             bool with_journeys = true);
QueryResult trex_query_overlay(const Timetable& tt, const TransferSet& ts,
                               const NestedPartition& part, const TransferOverlays& overlays,
                               const SuccessorTable& succ, StopId from, StopId to, Time dep,
                               bool with_journeys = true);

}  // namespace trex
