#include <benchmark/benchmark.h>

#include "duet/sim/async_fifo.hpp"
#include "duet/sim/engine.hpp"

using namespace duet::sim;

static void BM_EventDispatch(benchmark::State& state) {
  for (auto _ : state) {
    state.PauseTiming();
    Engine e;
    auto& sys = e.register_domain("sys", 1'000'000'000, 0);
    std::uint64_t count = 0;
    for (int i = 0; i < 10'000; ++i)
      e.schedule_in_cycles(sys, i + 1, [&count] { ++count; });
    state.ResumeTiming();
    e.run_to_exhaustion();
    benchmark::DoNotOptimize(count);
  }
  state.SetItemsProcessed(state.iterations() * 10'000);
}
BENCHMARK(BM_EventDispatch);

static void BM_FifoCrossing(benchmark::State& state) {
  ClockDomain prod("sys", 1'000'000'000, 0);
  ClockDomain cons("fpga", 125'000'000, 0);
  AsyncFifo<std::uint64_t> fifo(8, 2, prod, cons);
  std::uint64_t pk = 0, ck = 0;
  for (auto _ : state) {
    while (!fifo.push(pk, prod.edge_time(pk))) {
      while (!fifo.pop(cons.edge_time(ck))) ++ck;
    }
    ++pk;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FifoCrossing);

static void BM_ClockEdgeMath(benchmark::State& state) {
  ClockDomain d("d", 333'333'333, 17);
  std::uint64_t t = 0;
  for (auto _ : state) {
    t = d.next_edge_at_or_after(t + 1);
    benchmark::DoNotOptimize(t);
  }
}
BENCHMARK(BM_ClockEdgeMath);

BENCHMARK_MAIN();
