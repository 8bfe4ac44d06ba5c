#include <array>
#include <functional>
#include <iterator>
#include <optional>
#include <random>
#include <vector>

#include "doctest.h"
#include "duet/coherence/cache.hpp"
#include "duet/coherence/directory.hpp"
#include "duet/coherence/fabric.hpp"

using namespace duet::coherence;
using duet::noc::Mesh;
using duet::noc::MeshParams;
using duet::noc::TileId;
using duet::sim::Engine;

namespace {

// Two CPU caches at (0,0) and (1,0), one directory shard at (0,1), memory
// controller at (1,1). Cache ids equal mesh tile indices so the directory
// audit and the scoreboard agree on naming.
struct System {
  Engine engine;
  duet::sim::ClockDomain& sys;
  Mesh mesh;
  Scoreboard sb;
  Fabric fabric;
  CacheController c0, c1;
  DirectoryShard dir;
  MemoryController mem;

  explicit System(CacheConfig cfg = {})
      : sys(engine.register_domain("sys", 1'000'000'000, 0)),
        mesh(engine, sys, MeshParams{.nx = 2, .ny = 2}),
        sb(cfg.line_bytes),
        fabric(engine, mesh, sys, cfg, &sb),
        c0(fabric, sys, {0, 0}, 0, false),
        c1(fabric, sys, {1, 0}, 1, false),
        dir((fabric.add_shard_tile({0, 1}), fabric.set_memctl_tile({1, 1}),
             fabric),
            {0, 1}),
        mem(fabric, {1, 1}) {
    mesh.attach({0, 0}, [this](const auto& m) { c0.handle_noc(m); });
    mesh.attach({1, 0}, [this](const auto& m) { c1.handle_noc(m); });
    mesh.attach({0, 1}, [this](const auto& m) { dir.handle_noc(m); });
    mesh.attach({1, 1}, [this](const auto& m) { mem.handle_noc(m); });
  }

  CacheController::Result blocking(CacheController& c,
                                   CacheController::Access a) {
    std::optional<CacheController::Result> r;
    c.access(a, [&](const CacheController::Result& res) { r = res; });
    engine.run_until([&] { return r.has_value(); });
    return *r;
  }

  std::uint64_t load(CacheController& c, std::uint64_t addr,
                     std::uint32_t size = 8) {
    return blocking(c, {.op = CacheController::AccessOp::Load,
                        .addr = addr,
                        .size = size})
        .value;
  }
  void store(CacheController& c, std::uint64_t addr, std::uint64_t v,
             std::uint32_t size = 8) {
    blocking(c, {.op = CacheController::AccessOp::Store,
                 .addr = addr,
                 .size = size,
                 .value = v});
  }

  void quiescence_audit() {
    c0.audit();
    c1.audit();
    dir.audit();
    sb.finish_audit(engine.now());
  }
};

}  // namespace

TEST_CASE("cold load fills in E with memory data") {
  System s;
  s.mem.poke_u64(0x100, 8, 0xdeadbeef12345678ull);
  CHECK(s.load(s.c0, 0x100) == 0xdeadbeef12345678ull);
  CHECK(s.c0.line_state(0x100) == Mesi::E);
  CHECK(s.c0.misses == 1);

  // Second access is a pure hit at the configured latency.
  auto t0 = s.engine.now();
  CHECK(s.load(s.c0, 0x108) == 0);
  CHECK(s.c0.hits == 1);
  CHECK(s.engine.now() - t0 == s.fabric.config().l2_hit_latency * 1'000);
  CHECK(s.sb.ok());
}

TEST_CASE("store to a line shared elsewhere invalidates the sharer") {
  System s;
  s.mem.poke_u64(0x200, 8, 7);
  CHECK(s.load(s.c0, 0x200) == 7);   // E at c0
  CHECK(s.load(s.c1, 0x200) == 7);   // downgrade -> S,S
  CHECK(s.c0.line_state(0x200) == Mesi::S);
  CHECK(s.c1.line_state(0x200) == Mesi::S);

  s.store(s.c1, 0x200, 99);
  CHECK(s.c1.line_state(0x200) == Mesi::M);
  CHECK(s.c0.line_state(0x200) == Mesi::I);

  // The earlier sharer reloads and observes the new value.
  CHECK(s.load(s.c0, 0x200) == 99);
  CHECK(s.sb.ok());
  s.quiescence_audit();
  CHECK(s.sb.ok());
}

TEST_CASE("read miss on a modified line triggers a secondary write-back") {
  System s;
  s.store(s.c0, 0x300, 41);
  CHECK(s.c0.line_state(0x300) == Mesi::M);
  CHECK(s.load(s.c1, 0x300) == 41);
  CHECK(s.c0.line_state(0x300) == Mesi::S);
  CHECK(s.c1.line_state(0x300) == Mesi::S);
  CHECK(s.dir.secondary_writebacks == 1);
  s.quiescence_audit();
  CHECK(s.sb.ok());
}

TEST_CASE("concurrent cas from two tiles: exactly one succeeds") {
  System s;
  std::optional<CacheController::Result> r0, r1;
  CacheController::Access cas{.op = CacheController::AccessOp::Cas,
                              .addr = 0x400,
                              .size = 8,
                              .value = 1,
                              .expected = 0};
  s.c0.access(cas, [&](const auto& r) { r0 = r; });
  s.c1.access(cas, [&](const auto& r) { r1 = r; });
  s.engine.run_until([&] { return r0 && r1; });
  CHECK(int(r0->cas_ok) + int(r1->cas_ok) == 1);
  CHECK(s.load(s.c0, 0x400) == 1);
  s.quiescence_audit();
  CHECK(s.sb.ok());
}

TEST_CASE("fetch_add returns the old value and accumulates") {
  System s;
  s.mem.poke_u64(0x80, 8, 10);
  auto r = s.blocking(s.c0, {.op = CacheController::AccessOp::FetchAdd,
                             .addr = 0x80,
                             .size = 8,
                             .value = 5});
  CHECK(r.value == 10);
  CHECK(s.load(s.c1, 0x80) == 15);
  CHECK(s.sb.ok());
}

TEST_CASE("misaligned and oversized accesses are rejected") {
  System s;
  CHECK_THROWS_AS(
      s.c0.access({.op = CacheController::AccessOp::Load, .addr = 3, .size = 8},
                  [](const auto&) {}),
      std::invalid_argument);
  CHECK_THROWS_AS(s.c0.access({.op = CacheController::AccessOp::Store,
                               .addr = 0,
                               .size = 16,
                               .value = 1},
                              [](const auto&) {}),
                  std::invalid_argument);
}

TEST_CASE("evictions write dirty data back and reloads observe it") {
  System s;
  // 8 KB / 16 B lines / 4 ways = 128 sets; stride 128 lines hits one set.
  const std::uint64_t stride = 128 * 16;
  for (std::uint64_t i = 0; i < 6; ++i)
    s.store(s.c0, 0x10 * 0 + i * stride, 1000 + i);
  CHECK(s.c0.resident_lines() <= 4);
  for (std::uint64_t i = 0; i < 6; ++i)
    CHECK(s.load(s.c1, i * stride) == 1000 + i);
  CHECK(s.sb.ok());
  s.engine.run_to_exhaustion();  // drain PutAcks
  s.quiescence_audit();
  CHECK(s.sb.ok());
}

TEST_CASE("randomized two-cache stress stays coherent") {
  System s;
  std::mt19937 rng(99);
  const std::uint64_t pool[] = {0x0, 0x10, 0x20, 0x800, 0x810,
                                0x8000, 0x8010, 0x40000};
  for (std::uint64_t a : pool) s.mem.poke_u64(a, 8, rng());

  // Two blocking agents, each issuing a random op as soon as the previous
  // one commits. The scoreboard checks every load against the store model.
  int remaining[2] = {400, 400};
  std::function<void(int)> issue = [&](int who) {
    if (remaining[who]-- <= 0) return;
    CacheController& c = who ? s.c1 : s.c0;
    CacheController::Access a;
    a.addr = pool[rng() % std::size(pool)];
    a.size = 8;
    switch (rng() % 4) {
      case 0: a.op = CacheController::AccessOp::Load; break;
      case 1:
        a.op = CacheController::AccessOp::Store;
        a.value = rng();
        break;
      case 2:
        a.op = CacheController::AccessOp::Cas;
        a.expected = rng() % 2;
        a.value = rng();
        break;
      default:
        a.op = CacheController::AccessOp::FetchAdd;
        a.value = 1;
        break;
    }
    c.access(a, [&, who](const auto&) { issue(who); });
  };
  issue(0);
  issue(1);
  s.engine.run_to_exhaustion();
  CHECK(remaining[0] < 0);
  CHECK(remaining[1] < 0);
  s.quiescence_audit();
  for (const auto& v : s.sb.violations())
    MESSAGE(v.invariant, ": ", v.detail);
  CHECK(s.sb.ok());
}

TEST_CASE("address interleaving across shards") {
  Engine e;
  auto& sys = e.register_domain("sys", 1'000'000'000, 0);
  Mesh mesh(e, sys, MeshParams{.nx = 4, .ny = 1});
  CacheConfig cfg;
  Fabric f(e, mesh, sys, cfg, nullptr);
  for (int i = 0; i < 4; ++i) f.add_shard_tile({i, 0});

  CHECK(f.shard_tile(0x0) == TileId{0, 0});
  CHECK(f.shard_tile(cfg.line_bytes) == TileId{1, 0});

  // Uniformity over random addresses: each shard within 5% of the mean.
  std::mt19937_64 rng(7);
  std::array<int, 4> histogram{};
  const int kDraws = 100'000;
  for (int i = 0; i < kDraws; ++i)
    ++histogram[f.shard_tile(rng() % (1ull << 32)).x];
  for (int h : histogram) {
    CHECK(h > kDraws / 4 * 0.95);
    CHECK(h < kDraws / 4 * 1.05);
  }
}

TEST_CASE("injected stale-sharer fault is caught by the scoreboard") {
  System s;
  s.mem.poke_u64(0x500, 8, 1);
  CHECK(s.load(s.c0, 0x500) == 1);
  CHECK(s.load(s.c1, 0x500) == 1);  // S at both

  s.fabric.fault = FaultInjection::StaleDirectorySharer;
  s.store(s.c1, 0x500, 2);  // directory skips the invalidation to c0

  bool swmr_flagged = false;
  for (const auto& v : s.sb.violations())
    if (v.invariant == "SWMR") swmr_flagged = true;
  CHECK(swmr_flagged);
}
