#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "duet/adapter/memory_hub.hpp"
#include "duet/sim/task.hpp"

namespace duet::adapter {

/// Write-through, virtually-indexed soft cache synthesized into the eFPGA.
/// Reads hit locally in FPGA cycles; misses and every store go to the
/// Memory Hub over the local protocol. Stores pass through a bounded write
/// buffer (optionally with read-after-write forwarding); the hub's
/// StoreAcks retire buffer slots but nothing ever waits on an Inv.
struct SoftCacheParams {
  unsigned lines = 64;           // direct-mapped
  unsigned write_buffer = 4;
  bool raw_forwarding = true;
  std::uint64_t hit_latency_cycles = 1;  // FPGA cycles
};

class SoftCache {
 public:
  using Params = SoftCacheParams;

  SoftCache(duet::sim::Engine& engine, const duet::sim::ClockDomain& fpga,
            LocalPort& hub, Params params = {});

  /// Awaitable read of up to 8 bytes (naturally aligned).
  duet::sim::Future<std::uint64_t> read(std::uint64_t vaddr,
                                        std::uint32_t size,
                                        duet::sim::PhaseLogPtr trace = nullptr);

  /// Awaitable store of up to 8 bytes; resolves once the store occupies a
  /// write-buffer slot (which is where backpressure appears).
  duet::sim::Future<bool> write(std::uint64_t vaddr, std::uint32_t size,
                                std::uint64_t value,
                                duet::sim::PhaseLogPtr trace = nullptr);

  /// Invalidate everything (used between benchmark repetitions).
  void flush_clean();

  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  double hit_rate() const {
    return hits + misses ? double(hits) / double(hits + misses) : 0.0;
  }
  std::size_t write_buffer_occupancy() const { return wb_.size(); }
  bool drained() const { return wb_.empty() && unacked_stores_ == 0; }

 private:
  struct Line {
    bool valid = false;
    std::uint64_t vline = 0;
    std::uint64_t paddr = 0;  // physical line base, learned from the LoadAck
    std::vector<std::uint8_t> data;
  };
  struct WbEntry {
    std::uint64_t vaddr;
    std::uint32_t size;
    std::uint64_t value;
    duet::sim::PhaseLogPtr trace;
    bool sent = false;
  };
  struct Waiter {
    std::uint64_t vaddr;
    std::uint32_t size;
    duet::sim::Future<std::uint64_t> fut;
    duet::sim::PhaseLogPtr trace;
  };

  void handle_hub(const LocalMsg& m);
  void apply_fill(const LocalMsg& m);
  void accept_write(WbEntry e);
  void admit_pending_writes();
  void pump();  // pushes pending Loads/Stores into the hub, one per edge
  Line& line_slot(std::uint64_t vline) {
    return lines_[(vline / line_bytes_) % lines_.size()];
  }
  bool wb_overlap(std::uint64_t vaddr, std::uint32_t size,
                  std::uint64_t* exact_value, bool* exact) const;
  std::uint64_t read_line_le(const Line& l, std::uint64_t vaddr,
                             std::uint32_t size) const;
  void write_line_le(Line& l, std::uint64_t vaddr, std::uint32_t size,
                     std::uint64_t value);

  duet::sim::Engine& engine_;
  const duet::sim::ClockDomain& fpga_;
  LocalPort& hub_;
  Params params_;
  std::uint32_t line_bytes_;
  std::vector<Line> lines_;
  std::deque<WbEntry> wb_;
  unsigned unacked_stores_ = 0;
  std::map<std::uint64_t, std::vector<Waiter>> pending_miss_;  // by vline
  std::deque<std::uint64_t> miss_queue_;  // vlines with an unsent Load
  // Stores that arrived while the buffer was full, with their futures.
  std::deque<std::pair<WbEntry, duet::sim::Future<bool>>> pending_writes_;
  bool pump_armed_ = false;
  bool drop_fault_used_ = false;
};

}  // namespace duet::adapter
