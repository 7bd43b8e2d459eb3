#pragma once

#include <cstdint>
#include <string>

#include "trex/customize.hpp"
#include "trex/partition.hpp"
#include "trex/timetable.hpp"
#include "trex/transfers.hpp"

namespace trex {

// Preprocessing stages in pipeline order. Each corresponds to one or more
// snapshot sections; ranks, overlays and the successor table are all products
// of the customize stage.
enum class Stage : std::uint32_t {
  kTimetable = 1u << 0,
  kTransfers = 1u << 1,
  kPartition = 1u << 2,
  kRanks = 1u << 3,
  kOverlays = 1u << 4,
  kSuccessor = 1u << 5,
};

inline constexpr std::uint32_t kStagesQuery =
    static_cast<std::uint32_t>(Stage::kTimetable) | static_cast<std::uint32_t>(Stage::kTransfers);
inline constexpr std::uint32_t kStagesOverlayQuery =
    kStagesQuery | static_cast<std::uint32_t>(Stage::kPartition) |
    static_cast<std::uint32_t>(Stage::kRanks) | static_cast<std::uint32_t>(Stage::kOverlays) |
    static_cast<std::uint32_t>(Stage::kSuccessor);

struct EngineState {
  Timetable tt;
  TransferSet transfers;
  NestedPartition partition;
  TransferOverlays overlays;
  SuccessorTable successor;
  std::uint32_t stages = 0;

  bool has(Stage s) const { return (stages & static_cast<std::uint32_t>(s)) != 0; }
  void mark(Stage s) { stages |= static_cast<std::uint32_t>(s); }
};

// One sectioned file: magic "TRXS", version, then one length-prefixed and
// checksummed section per present stage. Integers are little-endian.
void save_snapshot(const std::string& path, const EngineState& state);

// Loads a snapshot and verifies that every stage in `required` is present;
// a missing stage raises an error naming the command that would produce it.
EngineState load_snapshot(const std::string& path, std::uint32_t required = 0);

}  // namespace trex
