#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "duet/sim/clock.hpp"
#include "duet/sim/time.hpp"

namespace duet::sim {

class DeadlockError : public std::runtime_error {
 public:
  explicit DeadlockError(const std::string& what) : std::runtime_error(what) {}
};

/// Single-threaded discrete-event engine. Events are totally ordered by
/// (time, domain name, registration order), so a given configuration always
/// replays the exact same event sequence.
class Engine {
 public:
  Engine() = default;
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  ClockDomain& register_domain(const std::string& name,
                               std::uint64_t frequency_hz, SimTime phase_ps) {
    if (domains_.count(name))
      throw std::invalid_argument("duplicate clock domain: " + name);
    auto dom = std::make_unique<ClockDomain>(name, frequency_hz, phase_ps);
    ClockDomain& ref = *dom;
    domains_.emplace(name, std::move(dom));
    return ref;
  }

  ClockDomain& domain(const std::string& name) {
    auto it = domains_.find(name);
    if (it == domains_.end())
      throw std::invalid_argument("unknown clock domain: " + name);
    return *it->second;
  }

  SimTime now() const { return now_; }

  /// Schedules `fn` at absolute time `t`, tagged with `dom` for tie-breaking.
  void schedule_at(SimTime t, const ClockDomain& dom,
                   std::function<void()> fn) {
    if (t < now_) throw std::logic_error("scheduling into the past");
    queue_.push(Event{t, dom.name(), next_seq_++, std::move(fn)});
  }

  /// Schedules `fn` on the first rising edge of `dom` at or after `t`.
  void schedule_at_edge(const ClockDomain& dom, SimTime t,
                        std::function<void()> fn) {
    schedule_at(dom.next_edge_at_or_after(t < now_ ? now_ : t), dom,
                std::move(fn));
  }

  /// Schedules `fn` on the `cycles`-th rising edge strictly after now
  /// (cycles == 0 fires immediately at the current time).
  void schedule_in_cycles(const ClockDomain& dom, std::uint64_t cycles,
                          std::function<void()> fn) {
    if (cycles == 0) {
      schedule_at(now_, dom, std::move(fn));
      return;
    }
    std::uint64_t k = dom.edge_at_or_after(now_ + 1);
    schedule_at(dom.edge_time(k + cycles - 1), dom, std::move(fn));
  }

  /// Registers a named agent for the deadlock dump. The callback reports the
  /// agent's current blocking state.
  void register_agent(std::string name, std::function<std::string()> status) {
    agents_.emplace_back(std::move(name), std::move(status));
  }

  /// Processes events in order until `condition` returns true. Throws
  /// DeadlockError (with a dump of all registered agents) if the queue runs
  /// dry first.
  SimTime run_until(const std::function<bool()>& condition) {
    while (!condition()) {
      if (queue_.empty()) throw DeadlockError(deadlock_dump());
      Event ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      ev.fn();
    }
    return now_;
  }

  /// Drains the queue completely (for workloads that quiesce on their own).
  SimTime run_to_exhaustion() {
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      ev.fn();
    }
    return now_;
  }

  bool pending() const { return !queue_.empty(); }

 private:
  struct Event {
    SimTime time;
    std::string domain;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.domain != b.domain) return a.domain > b.domain;
      return a.seq > b.seq;
    }
  };

  std::string deadlock_dump() const {
    std::string s = "deadlock: no pending events and condition not met\n";
    for (const auto& [name, status] : agents_)
      s += "  agent " + name + ": " + status() + "\n";
    return s;
  }

  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_map<std::string, std::unique_ptr<ClockDomain>> domains_;
  std::vector<std::pair<std::string, std::function<std::string()>>> agents_;
};

}  // namespace duet::sim
