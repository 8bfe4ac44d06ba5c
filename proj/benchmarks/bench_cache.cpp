#include <benchmark/benchmark.h>

#include "duet/coherence/cache.hpp"
#include "duet/coherence/directory.hpp"

using namespace duet::coherence;

// Hit-path throughput of one cache behind the full NoC + directory wiring.
static void BM_CacheHitLoop(benchmark::State& state) {
  duet::sim::Engine engine;
  auto& sys = engine.register_domain("sys", 1'000'000'000, 0);
  duet::noc::Mesh mesh(engine, sys, {.nx = 2, .ny = 2});
  Fabric fabric(engine, mesh, sys, CacheConfig{}, nullptr);
  fabric.add_shard_tile({0, 1});
  fabric.set_memctl_tile({1, 1});
  CacheController cache(fabric, sys, {0, 0}, 0, false);
  DirectoryShard dir(fabric, {0, 1});
  MemoryController mem(fabric, {1, 1});
  mesh.attach({0, 0}, [&](const auto& m) { cache.handle_noc(m); });
  mesh.attach({0, 1}, [&](const auto& m) { dir.handle_noc(m); });
  mesh.attach({1, 1}, [&](const auto& m) { mem.handle_noc(m); });

  std::uint64_t ops = 0;
  for (auto _ : state) {
    bool done = false;
    cache.access({.op = CacheController::AccessOp::Store,
                  .addr = (ops % 64) * 8,
                  .size = 8,
                  .value = ops},
                 [&](const auto&) { done = true; });
    engine.run_until([&] { return done; });
    ++ops;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CacheHitLoop);
