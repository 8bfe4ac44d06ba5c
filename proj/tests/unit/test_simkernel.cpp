#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "duet/sim/async_fifo.hpp"
#include "duet/sim/engine.hpp"
#include "duet/sim/task.hpp"

using namespace duet::sim;

namespace {

// Independent CDC timing oracle: enumerate consumer edges one by one and
// return the first edge at or after commit + stages consumer periods. Shares
// no code with AsyncFifo (edge times recomputed from first principles).
SimTime oracle_visible(SimTime commit, unsigned stages, std::uint64_t freq_hz,
                       SimTime phase_ps) {
  SimTime period = (kPsPerSecond + freq_hz - 1) / freq_hz;
  SimTime deadline = commit + SimTime(stages) * period;
  for (std::uint64_t k = 0;; ++k) {
    SimTime edge = phase_ps + k * kPsPerSecond / freq_hz;
    if (edge >= deadline) return edge;
  }
}

}  // namespace

TEST_CASE("clock edge times") {
  ClockDomain sys("sys", 1'000'000'000, 0);
  CHECK(sys.edge_time(5) == 5'000);  // 5 ns

  ClockDomain f500("fpga", 500'000'000, 0);
  CHECK(f500.edge_time(5) == 10'000);  // 10 ns

  ClockDomain f20("fpga20", 20'000'000, 0);
  CHECK(f20.edge_time(1) == 50'000);  // 50 ns

  CHECK_THROWS_AS(ClockDomain("bad", 0, 0), std::invalid_argument);
}

TEST_CASE("edge_at_or_after is exact at boundaries") {
  ClockDomain d("d", 333'000'000, 7);  // awkward period, nonzero phase
  for (std::uint64_t k = 0; k < 2000; ++k) {
    SimTime t = d.edge_time(k);
    CHECK(d.edge_at_or_after(t) == k);
    CHECK(d.edge_at_or_after(t + 1) == k + 1);
  }
  CHECK(d.edge_time(1) > d.edge_time(0));
}

TEST_CASE("frequency reprogram keeps edges increasing") {
  ClockDomain d("d", 100'000'000, 0);
  SimTime before = d.edge_time(3);
  d.set_frequency(250'000'000, before + 1);
  SimTime anchor = d.edge_time(0);
  CHECK(anchor >= before + 1);
  CHECK(anchor == 40'000);  // next 100 MHz edge after 30 ns
  CHECK(d.edge_time(1) - anchor == 4'000);
}

TEST_CASE("engine rejects duplicate domains") {
  Engine e;
  e.register_domain("sys", 1'000'000'000, 0);
  CHECK_THROWS_AS(e.register_domain("sys", 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(e.domain("nope"), std::invalid_argument);
}

TEST_CASE("run_until trivial cases") {
  Engine e;
  auto& sys = e.register_domain("sys", 1'000'000'000, 0);

  // Empty system, condition already true.
  CHECK(e.run_until([] { return true; }) == 0);

  // Single agent delaying 10 sys cycles lands at 10 ns.
  bool done = false;
  e.schedule_in_cycles(sys, 10, [&] { done = true; });
  CHECK(e.run_until([&] { return done; }) == 10'000);
}

TEST_CASE("deadlock reports blocked agents") {
  Engine e;
  e.register_domain("sys", 1'000'000'000, 0);
  e.register_agent("cpu0", [] { return std::string("waiting on lock"); });
  try {
    e.run_until([] { return false; });
    FAIL("expected DeadlockError");
  } catch (const DeadlockError& err) {
    std::string what = err.what();
    CHECK(what.find("cpu0") != std::string::npos);
    CHECK(what.find("waiting on lock") != std::string::npos);
  }
}

TEST_CASE("deterministic interleaving of two domains") {
  auto run_once = [] {
    Engine e;
    auto& sys = e.register_domain("sys", 1'000'000'000, 0);
    auto& fpga = e.register_domain("fpga", 125'000'000, 0);
    std::string order;
    for (int i = 0; i < 40; ++i) {
      e.schedule_in_cycles(sys, i + 1, [&order, i] {
        order += "s" + std::to_string(i) + ";";
      });
      e.schedule_in_cycles(fpga, i + 1, [&order, i] {
        order += "f" + std::to_string(i) + ";";
      });
    }
    e.run_to_exhaustion();
    return order;
  };
  std::string a = run_once();
  std::string b = run_once();
  CHECK(a == b);
  CHECK(!a.empty());
}

TEST_CASE("fifo visibility matches the edge-enumeration oracle") {
  ClockDomain prod("sys", 1'000'000'000, 0);
  ClockDomain cons("fpga", 500'000'000, 0);
  AsyncFifo<int> fifo(8, 2, prod, cons);

  CHECK(fifo.push(42, 0));
  // Committed at t=0: not visible before 4 ns plus edge alignment.
  SimTime expect = oracle_visible(0, 2, 500'000'000, 0);
  CHECK(expect == 4'000);
  CHECK(fifo.next_visible_time() == expect);
  CHECK(fifo.front_visible(expect - 1) == nullptr);
  CHECK(fifo.pop(expect - 1) == std::nullopt);
  REQUIRE(fifo.front_visible(expect) != nullptr);
  CHECK(fifo.pop(expect) == 42);
}

TEST_CASE("fifo basics: empty pop, same-domain stage-1, backpressure") {
  ClockDomain d("d", 1'000'000'000, 0);
  AsyncFifo<int> fifo(2, 1, d, d);

  CHECK(fifo.pop(0) == std::nullopt);

  // Same domain, one stage: entry committed on edge k pops on edge k+1.
  CHECK(fifo.push(7, d.edge_time(3)));
  CHECK(fifo.next_visible_time() == d.edge_time(4));
  CHECK(fifo.next_visible_time() == oracle_visible(d.edge_time(3), 1,
                                                   1'000'000'000, 0));

  CHECK(fifo.push(8, d.edge_time(4)));
  CHECK(fifo.full());
  CHECK(!fifo.push(9, d.edge_time(5)));  // backpressure, no state change
  CHECK(fifo.size() == 2);

  // FIFO order preserved.
  CHECK(fifo.pop(d.edge_time(9)) == 7);
  CHECK(fifo.pop(d.edge_time(9)) == 8);
}

TEST_CASE("fifo stress: no loss or reordering at ratios 1/50..1/2") {
  std::mt19937 rng(0xd0e7);
  for (std::uint64_t div : {50u, 20u, 13u, 7u, 4u, 2u}) {
    ClockDomain prod("sys", 1'000'000'000, 0);
    ClockDomain cons("fpga", 1'000'000'000 / div, 0);
    AsyncFifo<int> fifo(8, 2, prod, cons);

    std::vector<int> sent, received;
    std::vector<SimTime> sent_at;
    int next = 0;
    std::uint64_t pk = 0, ck = 0;
    while (received.size() < 500) {
      SimTime pt = prod.edge_time(pk);
      SimTime ct = cons.edge_time(ck);
      if (pt <= ct && next < 500) {
        if (rng() % 2 && fifo.push(next, pt)) {
          sent.push_back(next);
          sent_at.push_back(pt);
          ++next;
        }
        ++pk;
      } else {
        if (auto v = fifo.pop(ct)) {
          // Visibility lower bound from the oracle.
          std::size_t i = received.size();
          CHECK(ct >= sent_at[i] + 2 * cons.period_ps());
          received.push_back(*v);
        }
        ++ck;
        if (next >= 500 && fifo.empty()) break;
      }
    }
    CHECK(received == sent);
  }
}

namespace {
Task wait_and_record(Future<int> f, std::vector<int>& log) {
  int v = co_await await_value(f);
  log.push_back(v);
}
Task barrier_agent(Barrier& b, int id, std::vector<int>& log) {
  co_await b.arrive();
  log.push_back(id);
}
}  // namespace

TEST_CASE("future completes an awaiting coroutine") {
  std::vector<int> log;
  auto f = make_future<int>();
  wait_and_record(f, log);
  CHECK(log.empty());
  f->complete(5);
  CHECK(log == std::vector<int>{5});

  // Already-completed future resumes without suspending.
  wait_and_record(f, log);
  CHECK(log.size() == 2);
}

TEST_CASE("barrier releases waiters in arrival order") {
  Barrier b(3);
  std::vector<int> log;
  barrier_agent(b, 1, log);
  barrier_agent(b, 2, log);
  CHECK(log.empty());
  barrier_agent(b, 3, log);
  CHECK(log == std::vector<int>{1, 2, 3});
}
