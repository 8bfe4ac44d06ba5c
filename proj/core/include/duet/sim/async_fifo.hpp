#pragma once

#include <cstddef>
#include <deque>
#include <optional>

#include "duet/sim/clock.hpp"
#include "duet/sim/time.hpp"

namespace duet::sim {

/// Bounded FIFO crossing two clock domains. An entry committed at producer
/// time t becomes visible to the consumer at the first consumer rising edge
/// at or after t + sync_stages consumer periods (Gray-pointer synchronizer
/// model). A full FIFO back-pressures the producer: push() returns false and
/// leaves the queue untouched.
template <typename T>
class AsyncFifo {
 public:
  AsyncFifo(std::size_t capacity, unsigned sync_stages,
            const ClockDomain& producer, const ClockDomain& consumer)
      : capacity_(capacity),
        sync_stages_(sync_stages),
        producer_(&producer),
        consumer_(&consumer) {}

  bool push(T payload, SimTime commit_time) {
    if (entries_.size() >= capacity_) return false;
    entries_.push_back(Entry{std::move(payload), commit_time});
    return true;
  }

  /// Pops the oldest entry whose visibility time is <= `t` (a consumer edge).
  std::optional<T> pop(SimTime t) {
    if (entries_.empty()) return std::nullopt;
    if (visible_time(entries_.front().commit) > t) return std::nullopt;
    T v = std::move(entries_.front().payload);
    entries_.pop_front();
    return v;
  }

  /// Peek without removing; same visibility rule as pop().
  const T* front_visible(SimTime t) const {
    if (entries_.empty()) return nullptr;
    if (visible_time(entries_.front().commit) > t) return nullptr;
    return &entries_.front().payload;
  }

  /// First consumer edge at which the head entry (if any) can be popped.
  std::optional<SimTime> next_visible_time() const {
    if (entries_.empty()) return std::nullopt;
    return visible_time(entries_.front().commit);
  }

  bool empty() const { return entries_.empty(); }
  bool full() const { return entries_.size() >= capacity_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const ClockDomain& consumer_domain() const { return *consumer_; }
  const ClockDomain& producer_domain() const { return *producer_; }

  /// Test hook: swaps the two oldest entries (protocol-mutation testing).
  void corrupt_reorder_head() {
    if (entries_.size() >= 2) std::swap(entries_[0], entries_[1]);
  }

 private:
  struct Entry {
    T payload;
    SimTime commit;
  };

  SimTime visible_time(SimTime commit) const {
    // Visibility uses the consumer's current period, so a mid-run clock
    // reprogram affects entries not yet synchronized.
    SimTime deadline = commit + SimTime(sync_stages_) * consumer_->period_ps();
    return consumer_->next_edge_at_or_after(deadline);
  }

  std::size_t capacity_;
  unsigned sync_stages_;
  const ClockDomain* producer_;
  const ClockDomain* consumer_;
  std::deque<Entry> entries_;
};

}  // namespace duet::sim
