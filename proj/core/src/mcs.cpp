#include "duet/workload/mcs.hpp"

#include <stdexcept>

namespace duet::workload {

namespace {
constexpr std::uint64_t kNextOff = 0;
constexpr std::uint64_t kWaitOff = 8;

sim::Task acquire_task(McsLock* lk, Cpu* c, std::uint64_t node,
                       sim::Future<std::uint64_t> done) {
  co_await sim::await_value(c->store(node + kNextOff, 0));
  co_await sim::await_value(c->store(node + kWaitOff, 1));
  // Atomic swap of the tail pointer, built from a CAS retry loop.
  std::uint64_t prev;
  for (;;) {
    std::uint64_t cur =
        co_await sim::await_value(c->load(lk->lock_addr()));
    auto [old, ok] =
        co_await sim::await_value(c->cas(lk->lock_addr(), cur, node));
    if (ok) {
      prev = old;
      break;
    }
  }
  if (prev != 0) {
    co_await sim::await_value(c->store(prev + kNextOff, node));
    // Spin on the local node line until the predecessor hands over.
    while (co_await sim::await_value(c->load(node + kWaitOff)) != 0)
      co_await sim::await_value(c->compute(4));
  }
  done->complete(node);
}

sim::Task release_task(McsLock* lk, Cpu* c, std::uint64_t node,
                       sim::Future<std::uint64_t> done) {
  std::uint64_t next = co_await sim::await_value(c->load(node + kNextOff));
  if (next == 0) {
    auto [old, ok] =
        co_await sim::await_value(c->cas(lk->lock_addr(), node, 0));
    if (ok) {
      done->complete(0);
      co_return;
    }
    if (old == 0) throw std::logic_error("MCS release without ownership");
    // A successor is mid-enqueue: wait for its link to appear.
    do {
      co_await sim::await_value(c->compute(4));
      next = co_await sim::await_value(c->load(node + kNextOff));
    } while (next == 0);
  }
  co_await sim::await_value(c->store(next + kWaitOff, 0));
  done->complete(next);
}

}  // namespace

sim::Future<std::uint64_t> McsLock::acquire(Cpu& c, std::uint64_t node) {
  auto f = sim::make_future<std::uint64_t>();
  acquire_task(this, &c, node, f);
  return f;
}

sim::Future<std::uint64_t> McsLock::release(Cpu& c, std::uint64_t node) {
  auto f = sim::make_future<std::uint64_t>();
  release_task(this, &c, node, f);
  return f;
}

}  // namespace duet::workload
