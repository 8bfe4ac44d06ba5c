#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "doctest.h"
#include "duet/adapter/cdc_noc_bridge.hpp"
#include "duet/adapter/control_hub.hpp"
#include "duet/adapter/fpga_manager.hpp"
#include "duet/adapter/memory_hub.hpp"
#include "duet/adapter/soft_cache.hpp"
#include "duet/coherence/directory.hpp"

using namespace duet::adapter;
using duet::coherence::CacheConfig;
using duet::coherence::CacheController;
using duet::coherence::DirectoryShard;
using duet::coherence::Fabric;
using duet::coherence::FaultInjection;
using duet::coherence::kMmioRead;
using duet::coherence::kMmioWrite;
using duet::coherence::MemoryController;
using duet::coherence::Scoreboard;
using duet::noc::Mesh;
using duet::noc::MeshParams;
using duet::noc::MsgClass;
using duet::noc::NocMessage;
using duet::noc::TileId;
using duet::sim::Engine;
using duet::sim::SimTime;

namespace {

std::uint64_t noc_total(const Mesh& m) {
  std::uint64_t n = 0;
  for (unsigned c = 0; c < 5; ++c) n += m.sent_count(MsgClass(c));
  return n;
}

struct Options {
  std::uint64_t fpga_hz = 250'000'000;
  SoftCacheParams soft;
  ControlParams ctl;
  HubParams hub;
};

// One CPU cache, one Duet Adapter (Memory Hub + soft cache + Control Hub),
// a directory shard and memory, on a 3x2 mesh. Tile (2,1) is a bare MMIO
// requester whose responses are collected for inspection.
struct AdapterSystem {
  Engine engine;
  duet::sim::ClockDomain& sys;
  duet::sim::ClockDomain& fpga;
  Mesh mesh;
  Scoreboard sb;
  Fabric fabric;
  CacheController cpu;
  DirectoryShard dir;
  MemoryController mem;
  std::shared_ptr<AdapterState> state;
  MemoryHub hub;
  ControlHub ctl;
  SoftCache soft;

  std::map<std::uint64_t, std::pair<std::uint64_t, std::uint32_t>> resps;
  std::vector<std::uint64_t> resp_order;
  std::uint64_t next_req = 1;

  explicit AdapterSystem(Options opt = {}, CacheConfig cfg = {})
      : sys(engine.register_domain("sys", 1'000'000'000, 0)),
        fpga(engine.register_domain("fpga", opt.fpga_hz, 0)),
        mesh(engine, sys, MeshParams{.nx = 3, .ny = 2}),
        sb(cfg.line_bytes),
        fabric(engine, mesh, sys, cfg, &sb),
        cpu(fabric, sys, {0, 0}, 0, false),
        dir((fabric.add_shard_tile({0, 1}), fabric.set_memctl_tile({1, 1}),
             fabric),
            {0, 1}),
        mem(fabric, {1, 1}),
        state(std::make_shared<AdapterState>(7, &sb)),
        hub(fabric, fpga, {1, 0}, /*hub_id=*/1, state, opt.hub),
        ctl(fabric, fpga, {2, 0}, state, opt.ctl),
        soft(engine, fpga, hub, opt.soft) {
    mesh.attach({0, 0}, [this](const auto& m) { cpu.handle_noc(m); });
    mesh.attach({0, 1}, [this](const auto& m) { dir.handle_noc(m); });
    mesh.attach({1, 1}, [this](const auto& m) { mem.handle_noc(m); });
    mesh.attach({1, 0}, [this](const auto& m) { hub.handle_noc(m); });
    mesh.attach({2, 0}, [this](const auto& m) { ctl.handle_noc(m); });
    mesh.attach({2, 1}, [this](const auto& m) {
      resps[m.req_id] = {m.value, m.size};
      resp_order.push_back(m.req_id);
    });
  }

  std::uint64_t soft_read(std::uint64_t vaddr, std::uint32_t size = 8) {
    auto f = soft.read(vaddr, size);
    engine.run_until([&] { return f->ready(); });
    return f->value();
  }
  void soft_write(std::uint64_t vaddr, std::uint64_t v,
                  std::uint32_t size = 8) {
    auto f = soft.write(vaddr, size, v);
    engine.run_until([&] { return f->ready(); });
  }

  std::uint64_t cpu_load(std::uint64_t addr) {
    std::optional<CacheController::Result> r;
    cpu.access({.op = CacheController::AccessOp::Load, .addr = addr, .size = 8},
               [&](const auto& res) { r = res; });
    engine.run_until([&] { return r.has_value(); });
    return r->value;
  }
  void cpu_store(std::uint64_t addr, std::uint64_t v) {
    std::optional<CacheController::Result> r;
    cpu.access({.op = CacheController::AccessOp::Store,
                .addr = addr,
                .size = 8,
                .value = v},
               [&](const auto& res) { r = res; });
    engine.run_until([&] { return r.has_value(); });
  }

  std::uint64_t issue_mmio(std::uint64_t reg, bool write,
                           std::uint64_t value = 0) {
    NocMessage m;
    m.src = {2, 1};
    m.dst = {2, 0};
    m.msg_class = MsgClass::MmioReq;
    m.op = write ? kMmioWrite : kMmioRead;
    m.address = ctl.mmio_addr(reg);
    m.value = value;
    m.req_id = next_req++;
    mesh.send(std::move(m));
    return next_req - 1;
  }
  std::pair<std::uint64_t, std::uint32_t> mmio(std::uint64_t reg, bool write,
                                               std::uint64_t value = 0) {
    auto id = issue_mmio(reg, write, value);
    engine.run_until([&] { return resps.count(id) != 0; });
    return resps[id];
  }
  SimTime mmio_latency(std::uint64_t reg, bool write, std::uint64_t value = 0) {
    SimTime t0 = engine.now();
    mmio(reg, write, value);
    return engine.now() - t0;
  }

  void quiesce_and_audit() {
    engine.run_to_exhaustion();
    cpu.audit();
    hub.proxy().audit();
    dir.audit();
    sb.finish_audit(engine.now());
  }
};

}  // namespace

TEST_CASE("soft cache: miss fills through the hub, hit stays local") {
  AdapterSystem s;
  s.mem.poke_u64(0x100, 8, 0x1111'2222'3333'4444ull);
  CHECK(s.soft_read(0x100) == 0x1111'2222'3333'4444ull);
  CHECK(s.soft.misses == 1);
  CHECK(s.hub.loads_served == 1);

  std::uint64_t noc_before = noc_total(s.mesh);
  SimTime t0 = s.engine.now();
  CHECK(s.soft_read(0x108) == 0);  // same 16-byte line, untouched half
  CHECK(s.soft.hits == 1);
  CHECK(s.hub.loads_served == 1);            // no second hub request
  CHECK(noc_total(s.mesh) == noc_before);    // and no NoC traffic at all
  CHECK(s.engine.now() - t0 <= s.fpga.period_ps());
  s.quiesce_and_audit();
  CHECK(s.sb.ok());
}

TEST_CASE("proxy hit serves a soft miss with zero NoC traffic") {
  AdapterSystem s;
  s.mem.poke_u64(0x200, 8, 99);
  CHECK(s.soft_read(0x200) == 99);  // cold: full NoC round trip
  s.soft.flush_clean();
  std::uint64_t noc_before = noc_total(s.mesh);
  CHECK(s.soft_read(0x200) == 99);  // soft miss, proxy holds the line in E
  CHECK(noc_total(s.mesh) == noc_before);
  CHECK(s.hub.loads_served == 2);
  s.quiesce_and_audit();
  CHECK(s.sb.ok());
}

TEST_CASE("write buffer forwards reads after writes") {
  AdapterSystem s;
  auto wf = s.soft.write(0x300, 8, 0xabcd);
  // Read issued immediately, before the write-through store has even left
  // the FPGA domain: forwarding serves it from the buffer slot.
  auto rf = s.soft.read(0x300, 8);
  s.engine.run_until([&] { return rf->ready(); });
  CHECK(rf->value() == 0xabcd);
  CHECK(s.soft.hits == 1);
  CHECK(s.soft.misses == 0);
  s.quiesce_and_audit();
  CHECK(s.soft.drained());
  CHECK(s.sb.ok());
}

TEST_CASE("proxy NoC ack latency is independent of FPGA frequency") {
  auto inv_latency = [](std::uint64_t fpga_hz) {
    AdapterSystem s({.fpga_hz = fpga_hz});
    s.mem.poke_u64(0x400, 8, 1);
    s.soft_read(0x400);  // proxy now holds the line in E
    SimTime t0 = s.engine.now();
    s.cpu_store(0x400, 2);  // directory must invalidate the proxy copy
    SimTime d = s.engine.now() - t0;
    s.quiesce_and_audit();
    CHECK(s.sb.ok());
    return d;
  };
  SimTime slow = inv_latency(20'000'000);
  SimTime fast = inv_latency(500'000'000);
  CHECK(slow == fast);
}

TEST_CASE("invalidation between miss issue and fill applies in FIFO order") {
  AdapterSystem s({.fpga_hz = 20'000'000});
  s.mem.poke_u64(0x500, 8, 7);
  auto f = s.soft.read(0x500, 8);
  // Wait until the LoadAck is queued toward the slow domain, then store
  // from the CPU: the resulting Inv lands behind the ack in the same FIFO.
  s.engine.run_until([&] { return s.hub.loads_served == 1; });
  s.cpu_store(0x500, 8);
  CHECK(!f->ready());  // the ack is still crossing at 20 MHz
  s.engine.run_until([&] { return f->ready(); });
  CHECK(f->value() == 7);  // the read preceded the store
  CHECK(s.soft.misses == 1);
  s.engine.run_to_exhaustion();  // let the trailing Inv drain
  CHECK(s.soft_read(0x500) == 8);  // line was invalidated after the fill
  CHECK(s.soft.misses == 2);
  s.quiesce_and_audit();
  CHECK(s.sb.ok());
}

TEST_CASE("TLB") {
  Options opt;
  AdapterSystem s(opt);
  s.state->switches.tlb_enabled = true;
  auto& tlb = s.hub.tlb();

  SUBCASE("identity map translates and faults only once") {
    tlb.map(5, {.ppn = 5});
    std::uint64_t vaddr = 5 * kPageBytes + 0x40;
    s.mem.poke_u64(vaddr, 8, 123);  // identity: paddr == vaddr
    SimTime t0 = s.engine.now();
    CHECK(s.soft_read(vaddr) == 123);
    SimTime first = s.engine.now() - t0;
    CHECK(s.hub.page_faults == 1);

    s.soft.flush_clean();
    t0 = s.engine.now();
    CHECK(s.soft_read(vaddr) == 123);  // TLB hit: no handler delay
    SimTime second = s.engine.now() - t0;
    CHECK(s.hub.page_faults == 1);
    // The miss paid the software-handler delay on top of the same path.
    CHECK(first >= second + 200 * s.sys.period_ps());
    s.quiesce_and_audit();
    CHECK(s.sb.ok());
  }

  SUBCASE("non-identity mapping reads through the physical page") {
    tlb.map(8, {.ppn = 3});
    s.mem.poke_u64(3 * kPageBytes + 0x10, 8, 77);
    CHECK(s.soft_read(8 * kPageBytes + 0x10) == 77);
    s.quiesce_and_audit();
    CHECK(s.sb.ok());
  }

  SUBCASE("write to a read-only page kills the accelerator") {
    tlb.map(5, {.ppn = 5});
    std::uint64_t good = 5 * kPageBytes;
    s.soft_read(good);  // proxy now holds a line
    tlb.map(9, {.ppn = 9, .read = true, .write = false});
    auto wf = s.soft.write(9 * kPageBytes, 8, 1);
    s.engine.run_until([&] { return !s.state->active(); });
    CHECK(s.state->error_code() == kErrKilled);
    // The proxy still answers coherence for its resident line.
    s.cpu_store(good, 42);
    CHECK(s.cpu_load(good) == 42);
  }
}

TEST_CASE("synonym resolution invalidates the old alias before the new ack") {
  AdapterSystem s;
  s.state->switches.tlb_enabled = true;
  s.hub.tlb().map(2, {.ppn = 6});
  s.hub.tlb().map(4, {.ppn = 6});  // alias: both map to physical page 6

  // Drive the hub directly so the raw eFPGA-bound message order is visible.
  std::vector<LocalMsg> egress;
  s.hub.set_efpga_sink([&](const LocalMsg& m) { egress.push_back(m); });

  LocalMsg a;
  a.kind = LocalKind::Load;
  a.addr = 2 * kPageBytes + 0x20;
  a.size = 8;
  s.hub.request(a);
  s.engine.run_until([&] { return egress.size() == 1; });
  CHECK(egress[0].kind == LocalKind::LoadAck);

  LocalMsg b = a;
  b.addr = 4 * kPageBytes + 0x20;  // same physical line, new virtual alias
  s.hub.request(b);
  s.engine.run_until([&] { return egress.size() == 3; });
  CHECK(egress[1].kind == LocalKind::Inv);
  CHECK(egress[1].addr == 2 * kPageBytes + 0x20);  // old alias, line base
  CHECK(egress[2].kind == LocalKind::LoadAck);
  CHECK(egress[2].addr == b.addr);
  CHECK(egress[1].seq < egress[2].seq);

  // Same alias again: no invalidation.
  s.hub.request(b);
  s.engine.run_until([&] { return egress.size() == 4; });
  CHECK(egress[3].kind == LocalKind::LoadAck);
}

TEST_CASE("shadowed plain write latency is constant across the sweep") {
  std::vector<SimTime> lat;
  for (std::uint64_t hz : {20'000'000ull, 100'000'000ull, 500'000'000ull}) {
    AdapterSystem s({.fpga_hz = hz});
    s.ctl.define_register(1, RegKind::Plain);
    lat.push_back(s.mmio_latency(1, true, 55));
  }
  CHECK(lat[0] == lat[1]);
  CHECK(lat[1] == lat[2]);
}

TEST_CASE("normal register access pays the crossing and scales with it") {
  auto normal_read = [](std::uint64_t hz) {
    AdapterSystem s({.fpga_hz = hz});
    s.ctl.define_register(3, RegKind::Normal);
    return s.mmio_latency(3, false);
  };
  SimTime at_100 = normal_read(100'000'000);
  SimTime at_500 = normal_read(500'000'000);
  CHECK(at_100 > at_500);
}

TEST_CASE("plain shadow read returns the accelerator-refreshed mirror") {
  AdapterSystem s;
  s.ctl.define_register(1, RegKind::Plain);
  s.ctl.set_shadow(1, 0x77);
  s.engine.run_to_exhaustion();  // refresh crosses into the fast domain
  auto [v, st] = s.mmio(1, false);
  CHECK(v == 0x77);
  CHECK(st == kStatusOk);
}

TEST_CASE("token FIFO read is non-blocking") {
  AdapterSystem s;
  s.ctl.define_register(2, RegKind::TokenFifo);
  auto [v0, st0] = s.mmio(2, false);
  CHECK(v0 == kEmptyToken);  // no token: distinguished value, immediately
  CHECK(st0 == kStatusOk);

  s.ctl.add_tokens(2, 1);
  s.engine.run_to_exhaustion();
  CHECK(s.mmio(2, false).first == 1);
  CHECK(s.mmio(2, false).first == kEmptyToken);
}

TEST_CASE("cpu-bound FIFO read blocks until the accelerator pushes") {
  AdapterSystem s;
  s.ctl.define_register(4, RegKind::CpuBoundFifo);
  auto id = s.issue_mmio(4, false);
  // Let the request reach the hub and park.
  s.engine.run_until([&] { return s.ctl.accesses_served == 1; });
  CHECK(s.resps.count(id) == 0);
  s.ctl.push_cpu_bound(4, 0x5150);
  s.engine.run_until([&] { return s.resps.count(id) != 0; });
  CHECK(s.resps[id].first == 0x5150);
  CHECK(s.resps[id].second == kStatusOk);
}

TEST_CASE("fpga-bound FIFO delivers CPU pushes in order with backpressure") {
  Options opt;
  opt.ctl.fifo_capacity = 2;
  AdapterSystem s(opt);
  s.ctl.define_register(5, RegKind::FpgaBoundFifo);
  CHECK(s.mmio(5, true, 10).second == kStatusOk);
  CHECK(s.mmio(5, true, 11).second == kStatusOk);
  CHECK(s.mmio(5, true, 12).second == kStatusBusy);  // queue full: retry
  s.engine.run_to_exhaustion();
  CHECK(s.ctl.pop_fpga_bound(5) == 10);
  CHECK(s.ctl.pop_fpga_bound(5) == 11);
  CHECK(s.ctl.pop_fpga_bound(5) == std::nullopt);
  CHECK(s.mmio(5, true, 12).second == kStatusOk);  // credit returned
}

TEST_CASE("FPGA observes register writes in issue order") {
  AdapterSystem s;
  s.ctl.define_register(1, RegKind::Plain);
  s.ctl.define_register(3, RegKind::Normal);
  std::vector<std::uint64_t> observed;
  s.ctl.set_fpga_observer(
      [&](std::uint64_t reg, bool, std::uint64_t) { observed.push_back(reg); });

  SUBCASE("shadow write then normal write") {
    auto a = s.issue_mmio(1, true, 0xA);  // shadowed: could complete early
    auto b = s.issue_mmio(3, true, 0xB);
    s.engine.run_until(
        [&] { return s.resps.count(a) && s.resps.count(b); });
    REQUIRE(observed.size() == 2);
    CHECK(observed[0] == 1);
    CHECK(observed[1] == 3);
    // Responses also come back in issue order, shadow parked behind normal.
    CHECK(s.resp_order == std::vector<std::uint64_t>{a, b});
  }

  SUBCASE("randomized mixed stream keeps issue order everywhere") {
    std::mt19937 rng(0xd0e7);
    std::vector<std::uint64_t> issued_regs;
    std::vector<std::uint64_t> ids;
    for (int i = 0; i < 40; ++i) {
      std::uint64_t reg = (rng() & 1) ? 1 : 3;
      issued_regs.push_back(reg);
      ids.push_back(s.issue_mmio(reg, true, i));
    }
    s.engine.run_until([&] { return s.resps.size() == ids.size(); });
    CHECK(observed == issued_regs);
    CHECK(s.resp_order == ids);
  }
}

TEST_CASE("blocking read timeout latches an error and never hangs the CPU") {
  Options opt;
  opt.ctl.blocking_timeout_cycles = 500;
  AdapterSystem s(opt);
  s.ctl.define_register(4, RegKind::CpuBoundFifo);
  SimTime t0 = s.engine.now();
  auto [v, st] = s.mmio(4, false);  // nothing will ever be pushed
  CHECK(st == kStatusTimeout);
  CHECK(v == kBogusValue);
  CHECK(s.engine.now() - t0 >= 500 * s.sys.period_ps());
  CHECK(!s.state->active());
  CHECK(s.state->error_code() == kErrTimeout);
  CHECK(s.ctl.timeouts == 1);

  // Every later access completes too, with bogus data.
  auto [v2, st2] = s.mmio(1, false);
  CHECK(v2 == kBogusValue);
  CHECK(st2 == kStatusTimeout);

  // Error register: read the code, write to clear and reactivate.
  CHECK(s.mmio(ControlHub::kErrorReg, false).first == kErrTimeout);
  s.mmio(ControlHub::kErrorReg, true);
  CHECK(s.state->active());
  s.mem.poke_u64(0x600, 8, 5);
  CHECK(s.soft_read(0x600) == 5);  // memory hubs accept requests again
}

TEST_CASE("parity fault deactivates the hubs; proxy keeps answering") {
  AdapterSystem s;
  s.mem.poke_u64(0x700, 8, 3);
  CHECK(s.soft_read(0x700) == 3);  // proxy resident in E

  s.hub.corrupt_next_parity = true;
  auto f = s.soft.write(0x700, 8, 4);  // this store's parity is mangled
  s.engine.run_until([&] { return !s.state->active(); });
  CHECK(s.state->error_code() == kErrParity);

  // Containment: nothing from the dead adapter reaches the NoC. (0x710
  // rather than 0x700: the poisoned store still sits in the write buffer
  // and would forward a read of its own address locally.)
  std::uint64_t noc_before = noc_total(s.mesh);
  s.soft.flush_clean();
  auto dead = s.soft.read(0x710, 8);
  s.engine.run_to_exhaustion();
  CHECK(!dead->ready());  // dropped at the hub, by design
  CHECK(noc_total(s.mesh) == noc_before);

  // ...while a remote CPU's invalidation to the proxy still completes.
  s.cpu_store(0x700, 9);
  CHECK(s.cpu_load(0x700) == 9);
  CHECK(s.sb.ok());
}

TEST_CASE("checker validation: each protocol mutation is caught") {
  auto violated = [](FaultInjection fault, auto scenario) {
    AdapterSystem s({.fpga_hz = 20'000'000});
    s.fabric.fault = fault;
    scenario(s);
    s.engine.run_to_exhaustion();
    s.sb.finish_audit(s.engine.now());
    return !s.sb.ok();
  };

  SUBCASE("SkipInvForward leaves stale soft data") {
    CHECK(violated(FaultInjection::SkipInvForward, [](AdapterSystem& s) {
      s.mem.poke_u64(0x800, 8, 1);
      s.soft_read(0x800);
      s.cpu_store(0x800, 2);  // the forwarded Inv is dropped
      // Push well past the delivery deadline before reading again.
      s.engine.schedule_in_cycles(s.sys, 10'000'000, [] {});
      s.engine.run_to_exhaustion();
      s.soft_read(0x800);  // stale hit, past the delivery deadline
    }));
  }

  SUBCASE("ReorderFifo breaks local-protocol delivery order") {
    CHECK(violated(FaultInjection::ReorderFifo, [](AdapterSystem& s) {
      // Two acks queue in the slow-drained FIFO; the head pair is swapped.
      auto w1 = s.soft.write(0x900, 8, 1);
      auto w2 = s.soft.write(0x910, 8, 2);
      s.engine.run_to_exhaustion();
    }));
  }

  SUBCASE("DropWriteThrough loses a store silently") {
    CHECK(violated(FaultInjection::DropWriteThrough, [](AdapterSystem& s) {
      s.soft_write(0xa00, 1);
      s.engine.run_to_exhaustion();
    }));
  }

  SUBCASE("DuplicateStoreAck replays a sequence number") {
    CHECK(violated(FaultInjection::DuplicateStoreAck, [](AdapterSystem& s) {
      s.soft_write(0xb00, 1);
      s.engine.run_to_exhaustion();
    }));
  }

  SUBCASE("IgnoreSynonym admits two aliases of one physical line") {
    // 61 lines: the two aliases index different direct-mapped slots, so
    // skipping the old-alias Inv leaves both resident at once.
    Options opt;
    opt.fpga_hz = 20'000'000;
    opt.soft.lines = 61;
    AdapterSystem s(opt);
    s.fabric.fault = FaultInjection::IgnoreSynonym;
    s.state->switches.tlb_enabled = true;
    s.hub.tlb().map(2, {.ppn = 6});
    s.hub.tlb().map(3, {.ppn = 6});
    s.soft_read(2 * kPageBytes + 0x20);
    s.soft_read(3 * kPageBytes + 0x20);  // Inv(old alias) skipped
    s.engine.run_to_exhaustion();
    CHECK(!s.sb.ok());
  }
}

TEST_CASE("FPGA manager") {
  AdapterSystem s({.fpga_hz = 500'000'000});
  FpgaManager mgr(s.engine, s.sys, s.fpga, s.state);
  Bitstream bs = Bitstream::make("tangent", {1, 2, 3, 4}, 250'000'000);

  SUBCASE("load is refused while the adapter is active") {
    CHECK(mgr.load_bitstream(bs, nullptr) == FpgaManager::Status::RejectedActive);
  }

  SUBCASE("corrupted bitstream fails the integrity check") {
    s.state->deactivate(kErrNone, s.engine.now());
    Bitstream bad = bs;
    bad.bytes[2] ^= 0xff;
    CHECK(mgr.load_bitstream(bad, nullptr) ==
          FpgaManager::Status::RejectedChecksum);
    CHECK(mgr.current().empty());  // previous behavior retained
  }

  SUBCASE("valid load swaps behavior after the programming delay") {
    s.state->deactivate(kErrNone, s.engine.now());
    bool done = false;
    CHECK(mgr.load_bitstream(bs, [&] { done = true; }) ==
          FpgaManager::Status::Ok);
    SimTime t0 = s.engine.now();
    s.engine.run_until([&] { return done; });
    CHECK(s.engine.now() - t0 >= 999 * s.sys.period_ps());
    CHECK(mgr.current() == "tangent");
    CHECK(s.fpga.period_ps() == 4000);  // reclocked to 250 MHz
  }

  SUBCASE("set_clock mid-run retimes subsequent FIFO crossings") {
    s.mem.poke_u64(0xc00, 8, 1);
    s.soft_read(0xc00);
    mgr.set_clock(100'000'000);
    CHECK(s.fpga.period_ps() == 10'000);
    s.mem.poke_u64(0xd00, 8, 2);
    CHECK(s.soft_read(0xd00) == 2);
    // Completion lands on an edge of the re-anchored 100 MHz grid.
    CHECK(s.fpga.next_edge_at_or_after(s.engine.now()) == s.engine.now());
  }
}

TEST_CASE("FPSoC-style CDC bridge reaches coherent memory, but slower") {
  Engine engine;
  auto& sys = engine.register_domain("sys", 1'000'000'000, 0);
  auto& slow = engine.register_domain("fabric", 100'000'000, 0);
  Mesh mesh(engine, sys, MeshParams{.nx = 2, .ny = 2});
  Scoreboard sb(CacheConfig{}.line_bytes);
  Fabric fabric(engine, mesh, sys, CacheConfig{}, &sb);
  CacheController cpu(fabric, sys, {0, 0}, 0, false);
  fabric.add_shard_tile({0, 1});
  fabric.set_memctl_tile({1, 1});
  DirectoryShard dir(fabric, {0, 1});
  MemoryController mem(fabric, {1, 1});
  mesh.attach({0, 0}, [&](const auto& m) { cpu.handle_noc(m); });
  mesh.attach({0, 1}, [&](const auto& m) { dir.handle_noc(m); });
  mesh.attach({1, 1}, [&](const auto& m) { mem.handle_noc(m); });
  CdcNocBridge bridge(fabric, slow, {1, 0});

  auto timed_load = [&](CacheController& c, std::uint64_t addr) {
    std::optional<CacheController::Result> r;
    SimTime t0 = engine.now();
    c.access({.op = CacheController::AccessOp::Load, .addr = addr, .size = 8},
             [&](const auto& res) { r = res; });
    engine.run_until([&] { return r.has_value(); });
    return std::pair{r->value, engine.now() - t0};
  };

  mem.poke_u64(0x100, 8, 0xfeed);
  mem.poke_u64(0x200, 8, 0xbeef);
  auto [v_slow, d_slow] = timed_load(bridge.controller(), 0x100);
  auto [v_fast, d_fast] = timed_load(cpu, 0x200);
  CHECK(v_slow == 0xfeed);
  CHECK(v_fast == 0xbeef);
  CHECK(d_slow > d_fast);  // both directions pay the synchronizer penalty

  // Shared-line traffic between the two stays coherent.
  std::optional<CacheController::Result> r;
  cpu.access({.op = CacheController::AccessOp::Store,
              .addr = 0x100,
              .size = 8,
              .value = 1},
             [&](const auto& res) { r = res; });
  engine.run_until([&] { return r.has_value(); });
  CHECK(timed_load(bridge.controller(), 0x100).first == 1);
  engine.run_to_exhaustion();
  cpu.audit();
  bridge.controller().audit();
  dir.audit();
  sb.finish_audit(engine.now());
  CHECK(sb.ok());
}
