#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "duet/sim/time.hpp"

namespace duet::sim {

/// Latency attribution buckets for a tagged transaction.
enum class Phase : unsigned { Noc = 0, FastCache = 1, SlowCache = 2, Cdc = 3 };

/// Accumulates per-phase time for one round trip. Components that touch a
/// tagged message record the interval they were responsible for; the probe
/// checks that the buckets sum to the measured total.
struct PhaseLog {
  std::array<SimTime, 4> ps{};

  void add(Phase p, SimTime from, SimTime to) {
    if (to > from) ps[static_cast<unsigned>(p)] += to - from;
  }

  SimTime total() const { return ps[0] + ps[1] + ps[2] + ps[3]; }
  SimTime get(Phase p) const { return ps[static_cast<unsigned>(p)]; }
};

using PhaseLogPtr = std::shared_ptr<PhaseLog>;

}  // namespace duet::sim
