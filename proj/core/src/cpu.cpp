#include "duet/workload/cpu.hpp"

namespace duet::workload {

using coherence::CacheController;
using duet::noc::MsgClass;
using duet::noc::NocMessage;

Cpu::Cpu(coherence::Fabric& fabric, duet::noc::TileId tile)
    : fabric_(fabric),
      tile_(tile),
      proc_key_(tile.y * fabric.mesh().params().nx + tile.x),
      cache_(fabric, fabric.sys(), tile, proc_key_, /*slow_domain=*/false) {
  fabric_.mesh().attach(tile, [this](const NocMessage& m) {
    if (m.msg_class == MsgClass::MmioResp) {
      auto node = mmio_waiting_.extract(m.req_id);
      if (node.empty())
        throw std::logic_error("MMIO response with no pending request");
      mmio_pending_ = false;
      node.mapped()->complete({m.value, m.size});
      return;
    }
    cache_.handle_noc(m);
  });
}

sim::Future<std::uint64_t> Cpu::mem_op(CacheController::Access a) {
  if (mem_pending_)
    throw std::logic_error("in-order core issued a second memory op");
  mem_pending_ = true;
  auto f = sim::make_future<std::uint64_t>();
  cache_.access(std::move(a), [this, f](const CacheController::Result& r) {
    mem_pending_ = false;
    f->complete(r.value);
  });
  return f;
}

sim::Future<std::uint64_t> Cpu::load(std::uint64_t addr, std::uint32_t size,
                                     sim::PhaseLogPtr trace) {
  return mem_op({CacheController::AccessOp::Load, addr, size, 0, 0,
                 std::move(trace)});
}

sim::Future<std::uint64_t> Cpu::store(std::uint64_t addr, std::uint64_t value,
                                      std::uint32_t size,
                                      sim::PhaseLogPtr trace) {
  return mem_op({CacheController::AccessOp::Store, addr, size, value, 0,
                 std::move(trace)});
}

sim::Future<std::pair<std::uint64_t, bool>> Cpu::cas(std::uint64_t addr,
                                                     std::uint64_t expected,
                                                     std::uint64_t desired) {
  if (mem_pending_)
    throw std::logic_error("in-order core issued a second memory op");
  mem_pending_ = true;
  auto f = sim::make_future<std::pair<std::uint64_t, bool>>();
  cache_.access({CacheController::AccessOp::Cas, addr, 8, desired, expected,
                 nullptr},
                [this, f](const CacheController::Result& r) {
                  mem_pending_ = false;
                  f->complete({r.value, r.cas_ok});
                });
  return f;
}

sim::Future<std::uint64_t> Cpu::fetch_add(std::uint64_t addr,
                                          std::uint64_t delta) {
  return mem_op(
      {CacheController::AccessOp::FetchAdd, addr, 8, delta, 0, nullptr});
}

sim::Future<MmioResult> Cpu::mmio(duet::noc::TileId dst,
                                  std::uint64_t reg_addr, bool is_write,
                                  std::uint64_t value,
                                  sim::PhaseLogPtr trace) {
  if (mmio_pending_)
    throw std::logic_error("I/O ordering: MMIO issued while one is pending");
  mmio_pending_ = true;
  auto f = sim::make_future<MmioResult>();
  NocMessage m;
  m.src = tile_;
  m.dst = dst;
  m.msg_class = MsgClass::MmioReq;
  m.op = is_write ? coherence::kMmioWrite : coherence::kMmioRead;
  m.address = reg_addr;
  m.value = value;
  m.req_id = (std::uint64_t(proc_key_) << 40) | next_req_++;
  m.trace = std::move(trace);
  mmio_waiting_[m.req_id] = f;
  fabric_.mesh().send(std::move(m));
  return f;
}

sim::Future<std::uint64_t> Cpu::compute(std::uint64_t cycles) {
  auto f = sim::make_future<std::uint64_t>();
  fabric_.engine().schedule_in_cycles(fabric_.sys(), cycles,
                                      [f] { f->complete(0); });
  return f;
}

}  // namespace duet::workload
