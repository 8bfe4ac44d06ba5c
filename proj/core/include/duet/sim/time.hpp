#pragma once

#include <cstdint>

namespace duet::sim {

/// Simulation time in picoseconds.
using SimTime = std::uint64_t;

constexpr SimTime kPsPerSecond = 1'000'000'000'000ull;
constexpr SimTime kPsPerNs = 1'000ull;

}  // namespace duet::sim
