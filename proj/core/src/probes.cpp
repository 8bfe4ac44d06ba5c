#include "duet/workload/probes.hpp"

#include <stdexcept>

#include "duet/workload/platform.hpp"

namespace duet::workload {

using adapter::LocalKind;
using adapter::LocalMsg;
using adapter::RegKind;
using duet::sim::SimTime;

namespace {

constexpr std::uint64_t kProbeReg = 18;   // shadowed (plain) register
constexpr std::uint64_t kNormalReg = 30;  // undefined kind = normal
constexpr std::uint64_t kBufA = 0x10000;  // CPU-filled buffer
constexpr std::uint64_t kBufB = 0x20000;  // eFPGA-filled buffer
constexpr std::uint64_t kXferBytes = 4096;

PlatformParams base_params(Mechanism m, std::uint64_t fpga_hz,
                           unsigned n_cpus) {
  PlatformParams p;
  p.mode = (m == Mechanism::EfpgaPullSlow || m == Mechanism::CpuPullSlow)
               ? Mode::Fpsoc
               : Mode::Duet;
  p.n_cpus = n_cpus;
  p.fpga_hz = fpga_hz;
  return p;
}

LatencyBreakdown from_trace(const sim::PhaseLog& t, SimTime total) {
  LatencyBreakdown b;
  b.total_ps = total;
  b.noc_ps = t.get(sim::Phase::Noc);
  b.fast_cache_ps = t.get(sim::Phase::FastCache);
  b.slow_cache_ps = t.get(sim::Phase::SlowCache);
  b.cdc_ps = t.get(sim::Phase::Cdc);
  return b;
}

/// Puts one line in Modified state inside the adapter-side cache, so the
/// following CPU load misses locally and hits the other party's cache.
void warm_adapter_side(Platform& plat, std::uint64_t addr) {
  plat.port(0).set_efpga_sink([](const LocalMsg&) {});
  LocalMsg st;
  st.kind = LocalKind::Store;
  st.addr = addr;
  st.size = 8;
  st.value = 0x5EED;
  plat.port(0).request(std::move(st));
  plat.engine().run_to_exhaustion();
}

}  // namespace

const char* mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::NormalReg: return "normal_reg";
    case Mechanism::ShadowReg: return "shadow_reg";
    case Mechanism::EfpgaPullSlow: return "efpga_pull_slow";
    case Mechanism::EfpgaPullProxy: return "efpga_pull_proxy";
    case Mechanism::CpuPullSlow: return "cpu_pull_slow";
    case Mechanism::CpuPullProxy: return "cpu_pull_proxy";
  }
  return "?";
}

Mechanism mechanism_from_name(const std::string& s) {
  for (Mechanism m :
       {Mechanism::NormalReg, Mechanism::ShadowReg, Mechanism::EfpgaPullSlow,
        Mechanism::EfpgaPullProxy, Mechanism::CpuPullSlow,
        Mechanism::CpuPullProxy})
    if (s == mechanism_name(m)) return m;
  throw std::invalid_argument("unknown mechanism: " + s);
}

LatencyBreakdown probe_latency(Mechanism m, std::uint64_t fpga_hz) {
  Platform plat(base_params(m, fpga_hz, 1));
  auto trace = std::make_shared<sim::PhaseLog>();
  auto& eng = plat.engine();

  switch (m) {
    case Mechanism::NormalReg:
    case Mechanism::ShadowReg: {
      std::uint64_t reg = kNormalReg;
      if (m == Mechanism::ShadowReg) {
        reg = kProbeReg;
        plat.ctl().define_register(reg, RegKind::Plain);
      }
      SimTime t0 = eng.now();
      auto f = plat.cpu(0).mmio(plat.ctl_tile(), plat.reg_addr(reg), false, 0,
                                trace);
      eng.run_until([&] { return f->ready(); });
      return from_trace(*trace, eng.now() - t0);
    }

    case Mechanism::CpuPullSlow:
    case Mechanism::CpuPullProxy: {
      warm_adapter_side(plat, kBufB);
      SimTime t0 = eng.now();
      auto f = plat.cpu(0).load(kBufB, 8, trace);
      eng.run_until([&] { return f->ready(); });
      return from_trace(*trace, eng.now() - t0);
    }

    case Mechanism::EfpgaPullSlow:
    case Mechanism::EfpgaPullProxy: {
      auto fs = plat.cpu(0).store(kBufA, 0xF00D);
      eng.run_until([&] { return fs->ready(); });
      eng.run_to_exhaustion();

      bool acked = false;
      plat.port(0).set_efpga_sink([&](const LocalMsg& a) {
        if (a.kind == LocalKind::LoadAck) acked = true;
      });
      LocalMsg ld;
      ld.kind = LocalKind::Load;
      ld.addr = kBufA;
      ld.size = 8;
      ld.trace = trace;
      SimTime t0 = eng.now();
      plat.port(0).request(std::move(ld));
      eng.run_until([&] { return acked; });
      return from_trace(*trace, eng.now() - t0);
    }
  }
  throw std::logic_error("unreachable");
}

namespace {

/// eFPGA-side streaming reader: one line request per FPGA edge at most,
/// as the soft logic's state machine would issue them.
struct PullDriver {
  Platform& plat;
  std::uint64_t base;
  std::uint32_t line_bytes;
  unsigned total;
  unsigned issued = 0;
  unsigned acked = 0;
  bool armed = false;

  void start() {
    plat.port(0).set_efpga_sink([this](const LocalMsg& a) {
      if (a.kind == LocalKind::LoadAck) ++acked;
    });
    pump();
  }
  void pump() {
    if (issued < total) {
      LocalMsg m;
      m.kind = LocalKind::Load;
      m.addr = base + std::uint64_t(issued) * line_bytes;
      m.size = line_bytes;
      if (plat.port(0).request(std::move(m))) ++issued;
    }
    if (issued < total && !armed) {
      armed = true;
      plat.engine().schedule_in_cycles(*plat.fpga(), 1, [this] {
        armed = false;
        pump();
      });
    }
  }
};

sim::Task cpu_fill(Cpu& c, std::uint64_t base, unsigned words, bool* done) {
  for (unsigned i = 0; i < words; ++i)
    co_await sim::await_value(c.store(base + 8 * i, i + 1));
  *done = true;
}

sim::Task cpu_drain(Cpu& c, std::uint64_t base, unsigned words, bool* done) {
  for (unsigned i = 0; i < words; ++i)
    co_await sim::await_value(c.load(base + 8 * i));
  *done = true;
}

}  // namespace

double probe_bandwidth(Mechanism m, std::uint64_t fpga_hz) {
  Platform plat(base_params(m, fpga_hz, 1));
  auto& eng = plat.engine();
  std::uint32_t lb = plat.fabric().config().line_bytes;
  unsigned words = kXferBytes / 8;

  if (m == Mechanism::EfpgaPullProxy || m == Mechanism::EfpgaPullSlow) {
    // The processor fills the source buffer, then reads a normal register —
    // the paper's synchronization barrier — and the fabric pulls the data.
    bool filled = false;
    cpu_fill(plat.cpu(0), kBufA, words, &filled);
    eng.run_until([&] { return filled; });
    auto sync = plat.cpu(0).mmio(plat.ctl_tile(), plat.reg_addr(kNormalReg),
                                 false);
    eng.run_until([&] { return sync->ready(); });
    eng.run_to_exhaustion();

    PullDriver drv{plat, kBufA, lb, unsigned(kXferBytes / lb)};
    SimTime t0 = eng.now();
    drv.start();
    eng.run_until([&] { return drv.acked == drv.total; });
    return double(kXferBytes) * 1e12 / double(eng.now() - t0);
  }

  if (m == Mechanism::CpuPullProxy || m == Mechanism::CpuPullSlow) {
    // The fabric fills its buffer (warming its own cache to M), then the
    // processor pulls it back one quadword at a time.
    unsigned stored = 0;
    plat.port(0).set_efpga_sink([&](const LocalMsg& a) {
      if (a.kind == LocalKind::StoreAck) ++stored;
    });
    for (unsigned i = 0; i < words; ++i) {
      LocalMsg st;
      st.kind = LocalKind::Store;
      st.addr = kBufB + 8 * i;
      st.size = 8;
      st.value = i + 1;
      while (!plat.port(0).request(std::move(st)))
        eng.run_until([&] { return stored > 0; });  // drain a slot
      eng.run_to_exhaustion();
    }
    eng.run_to_exhaustion();

    bool drained = false;
    SimTime t0 = eng.now();
    cpu_drain(plat.cpu(0), kBufB, words, &drained);
    eng.run_until([&] { return drained; });
    return double(kXferBytes) * 1e12 / double(eng.now() - t0);
  }

  throw std::invalid_argument("bandwidth probe needs a pull mechanism");
}

namespace {

sim::Task hammer(Cpu& c, duet::noc::TileId ctl, std::uint64_t addr,
                 unsigned ops, unsigned* left) {
  for (unsigned i = 0; i < ops; ++i) {
    co_await sim::await_value(c.mmio(ctl, addr, true, i));
    co_await sim::await_value(c.compute(12));
  }
  --*left;
}

double contention_run(unsigned n, std::uint64_t reg, bool shadow) {
  Platform plat(base_params(Mechanism::NormalReg, 500'000'000, n));
  if (shadow) plat.ctl().define_register(reg, RegKind::Plain);
  auto& eng = plat.engine();
  constexpr unsigned kOps = 64;
  unsigned left = n;
  SimTime t0 = eng.now();
  for (unsigned i = 0; i < n; ++i)
    hammer(plat.cpu(i), plat.ctl_tile(), plat.reg_addr(reg), kOps, &left);
  eng.run_until([&] { return left == 0; });
  double secs = double(eng.now() - t0) / 1e12;
  return double(kOps) * 8.0 / secs;  // per-processor bytes/sec
}

}  // namespace

ContentionPoint probe_contention(unsigned n_processors) {
  ContentionPoint p;
  p.normal_bw = contention_run(n_processors, kNormalReg, false);
  p.shadow_bw = contention_run(n_processors, kProbeReg, true);
  return p;
}

}  // namespace duet::workload
