#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "duet/sim/async_fifo.hpp"
#include "duet/sim/engine.hpp"
#include "duet/sim/phase.hpp"

namespace duet::adapter {

/// The Load/Store protocol spoken between a Memory Hub and the soft logic.
/// Only Load/Store travel eFPGA -> hub; only LoadAck/StoreAck/Inv travel
/// hub -> eFPGA. The hub never waits for any acknowledgement of an Inv.
enum class LocalKind : std::uint8_t { Load, Store, LoadAck, StoreAck, Inv };

struct LocalMsg {
  LocalKind kind = LocalKind::Load;
  std::uint64_t addr = 0;   // virtual when the TLB is on, else physical
  std::uint32_t size = 0;
  std::uint64_t value = 0;  // store data (size <= 8)
  std::vector<std::uint8_t> data;  // LoadAck line payload
  std::uint64_t paddr = 0;  // translated address, filled in by the hub on acks
  bool error = false;
  bool parity = false;      // even parity over kind/addr/value/size
  std::uint64_t seq = 0;    // hub -> eFPGA send order, for the order invariant
  duet::sim::PhaseLogPtr trace;
};

inline bool compute_parity(const LocalMsg& m) {
  std::uint64_t x = std::uint64_t(m.kind) ^ m.addr ^ m.value ^ m.size;
  x ^= x >> 32;
  x ^= x >> 16;
  x ^= x >> 8;
  x ^= x >> 4;
  x ^= x >> 2;
  x ^= x >> 1;
  return x & 1;
}

inline void stamp_parity(LocalMsg& m) { m.parity = compute_parity(m); }
inline bool parity_ok(const LocalMsg& m) {
  return m.parity == compute_parity(m);
}

/// One direction of a clock-domain crossing: an AsyncFifo plus the event
/// plumbing that wakes the consumer on the edge where the head entry becomes
/// visible and hands it to a sink callback. Push-side backpressure is
/// returned to the caller, who retries on a later producer edge. If the
/// payload carries a `trace` phase log, the crossing is attributed as Cdc.
template <typename T>
class CdcPort {
 public:
  using Sink = std::function<void(const T&)>;

  CdcPort(duet::sim::Engine& engine, const duet::sim::ClockDomain& producer,
          const duet::sim::ClockDomain& consumer, std::size_t capacity,
          unsigned sync_stages)
      : engine_(engine), fifo_(capacity, sync_stages, producer, consumer) {}

  void set_sink(Sink s) { sink_ = std::move(s); }

  bool push(T m) {
    if (!fifo_.push({std::move(m), engine_.now()}, engine_.now()))
      return false;
    arm();
    return true;
  }

  bool full() const { return fifo_.full(); }
  std::size_t size() const { return fifo_.size(); }
  const duet::sim::ClockDomain& consumer_domain() const {
    return fifo_.consumer_domain();
  }

  /// Test hook for the reordering protocol mutation.
  void corrupt_reorder_head() { fifo_.corrupt_reorder_head(); }

 private:
  void arm() {
    auto nv = fifo_.next_visible_time();
    if (!nv || armed_) return;
    armed_ = true;
    engine_.schedule_at(*nv, fifo_.consumer_domain(), [this] { drain(); });
  }

  void drain() {
    armed_ = false;
    while (auto e = fifo_.pop(engine_.now())) {
      auto& [msg, pushed_at] = *e;
      if constexpr (requires { msg.trace; }) {
        if (msg.trace)
          msg.trace->add(duet::sim::Phase::Cdc, pushed_at, engine_.now());
      }
      sink_(msg);
    }
    arm();
  }

  duet::sim::Engine& engine_;
  duet::sim::AsyncFifo<std::pair<T, duet::sim::SimTime>> fifo_;
  Sink sink_;
  bool armed_ = false;
};

using FifoPort = CdcPort<LocalMsg>;

}  // namespace duet::adapter
