#pragma once

#include <cstdint>
#include <limits>

namespace trex {

using StopId = std::uint32_t;
using TripId = std::uint32_t;
using LineId = std::uint32_t;
using EventId = std::uint32_t;
using TransferId = std::uint32_t;
using Time = std::int32_t;  // seconds since start of the service period
using CellId = std::uint16_t;
using Rank = std::uint8_t;

inline constexpr Time kInfTime = std::numeric_limits<Time>::max();
inline constexpr std::uint32_t kInvalid = std::numeric_limits<std::uint32_t>::max();

}  // namespace trex
