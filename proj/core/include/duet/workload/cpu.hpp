#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>

#include "duet/coherence/cache.hpp"
#include "duet/sim/task.hpp"

namespace duet::workload {

struct MmioResult {
  std::uint64_t value = 0;
  std::uint32_t status = 0;
};

/// An abstract in-order core: one private cache, blocking memory operations,
/// strictly ordered MMIO. Programs are coroutines that co_await the futures
/// these methods return; the one-outstanding rule is enforced, not assumed.
class Cpu {
 public:
  Cpu(coherence::Fabric& fabric, duet::noc::TileId tile);

  sim::Future<std::uint64_t> load(std::uint64_t addr, std::uint32_t size = 8,
                                  sim::PhaseLogPtr trace = nullptr);
  sim::Future<std::uint64_t> store(std::uint64_t addr, std::uint64_t value,
                                   std::uint32_t size = 8,
                                   sim::PhaseLogPtr trace = nullptr);
  /// Returns the old value; cas_ok is folded into the pair's second.
  sim::Future<std::pair<std::uint64_t, bool>> cas(std::uint64_t addr,
                                                  std::uint64_t expected,
                                                  std::uint64_t desired);
  sim::Future<std::uint64_t> fetch_add(std::uint64_t addr,
                                       std::uint64_t delta);

  /// One MMIO round trip to a Control Hub tile. MMIOs from one core never
  /// reorder: issuing while one is pending is a program bug.
  sim::Future<MmioResult> mmio(duet::noc::TileId dst, std::uint64_t reg_addr,
                               bool is_write, std::uint64_t value = 0,
                               sim::PhaseLogPtr trace = nullptr);

  /// Models computation between memory operations.
  sim::Future<std::uint64_t> compute(std::uint64_t cycles);

  coherence::CacheController& cache() { return cache_; }
  duet::noc::TileId tile() const { return tile_; }
  int index() const { return proc_key_; }

 private:
  sim::Future<std::uint64_t> mem_op(coherence::CacheController::Access a);

  coherence::Fabric& fabric_;
  duet::noc::TileId tile_;
  int proc_key_;
  coherence::CacheController cache_;
  bool mem_pending_ = false;
  bool mmio_pending_ = false;
  std::uint64_t next_req_ = 1;
  std::map<std::uint64_t, sim::Future<MmioResult>> mmio_waiting_;
};

}  // namespace duet::workload
