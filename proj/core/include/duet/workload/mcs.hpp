#pragma once

#include "duet/workload/cpu.hpp"

namespace duet::workload {

/// Queue-based spinlock over plain shared memory. Each contender brings its
/// own node record (two quadwords: next pointer, wait flag); waiters spin on
/// their local node line, so the only coherence traffic under contention is
/// the handoff itself. Node addresses double as queue pointers; 0 means
/// "no holder / no successor", so real nodes must not live at address 0.
class McsLock {
 public:
  explicit McsLock(std::uint64_t lock_addr) : lock_(lock_addr) {}

  /// Completes once the lock is held. FIFO among contenders.
  sim::Future<std::uint64_t> acquire(Cpu& c, std::uint64_t node);
  /// Hands the lock to the oldest waiter (or frees it).
  sim::Future<std::uint64_t> release(Cpu& c, std::uint64_t node);

  std::uint64_t lock_addr() const { return lock_; }

 private:
  std::uint64_t lock_;
};

}  // namespace duet::workload
