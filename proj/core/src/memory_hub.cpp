#include "duet/adapter/memory_hub.hpp"

#include <stdexcept>

namespace duet::adapter {

using coherence::CacheController;
using coherence::FaultInjection;
using duet::sim::SimTime;

MemoryHub::MemoryHub(coherence::Fabric& fabric,
                     const duet::sim::ClockDomain& fpga,
                     duet::noc::TileId tile, int hub_id,
                     std::shared_ptr<AdapterState> state, HubParams params)
    : fabric_(fabric),
      fpga_(fpga),
      hub_id_(hub_id),
      state_(std::move(state)),
      params_(params),
      // The directory names caches by mesh tile index; the proxy must agree.
      proxy_(fabric, fabric.sys(), tile,
             /*cache_id=*/tile.y * fabric.mesh().params().nx + tile.x,
             /*slow_domain=*/false),
      ingress_(fabric.engine(), fpga, fabric.sys(), params.fifo_capacity,
               params.sync_stages),
      egress_(fabric.engine(), fabric.sys(), fpga, params.fifo_capacity,
              params.sync_stages) {
  proxy_.set_mshr_limit(params_.mshr_entries);
  proxy_.set_listener(this);
  ingress_.set_sink([this](const LocalMsg& m) { handle_local(m); });
}

bool MemoryHub::request(LocalMsg m) {
  if (m.kind != LocalKind::Load && m.kind != LocalKind::Store)
    throw std::logic_error("only Load/Store may enter a Memory Hub");
  stamp_parity(m);
  if (corrupt_next_parity) {
    m.parity = !m.parity;
    corrupt_next_parity = false;
  }
  return ingress_.push(std::move(m));
}

void MemoryHub::handle_local(const LocalMsg& m) {
  SimTime now = fabric_.engine().now();
  coherence::Scoreboard* sb = state_->scoreboard();

  if (!parity_ok(m)) {
    state_->deactivate(kErrParity, now);
    return;
  }
  if (!state_->active()) return;  // exception latched: requests are dropped
  if (sb) sb->on_hub_accept_request(state_->adapter_id(), state_->active(), now);
  if (m.kind == LocalKind::Store && sb) sb->on_hub_store_arrival(hub_id_);

  translate_and_serve(m, 0);
}

void MemoryHub::translate_and_serve(const LocalMsg& m, unsigned fault_round) {
  if (!state_->switches.tlb_enabled) {
    serve(m, m.addr);
    return;
  }
  // Translation runs speculatively alongside the tag lookup: a hit costs no
  // extra cycles.
  std::uint64_t vpn = vpn_of(m.addr);
  bool is_write = m.kind == LocalKind::Store;
  auto res = tlb_.lookup(vpn, is_write);
  if (res.outcome == Tlb::Outcome::Hit) {
    serve(m, res.ppn * kPageBytes + page_off(m.addr));
    return;
  }
  if (fault_round >= 2)
    throw std::logic_error("TLB fault storm on vpn " + std::to_string(vpn));
  ++page_faults;
  // Interrupt to the handling processor, modeled as a fixed software delay,
  // after which the entry is installed and the access replayed — or the
  // accelerator is killed if the page table says no.
  fabric_.engine().schedule_in_cycles(
      fabric_.sys(), params_.tlb_handler_delay_cycles,
      [this, m, vpn, is_write, fault_round] {
        if (!tlb_.install(vpn, is_write)) {
          state_->deactivate(kErrKilled, fabric_.engine().now());
          return;
        }
        translate_and_serve(m, fault_round + 1);
      });
}

void MemoryHub::serve(LocalMsg m, std::uint64_t paddr) {
  std::uint32_t line_bytes = fabric_.config().line_bytes;
  std::uint64_t pline = coherence::line_of(paddr, line_bytes);

  // Synonym resolution: a resident physical line may alias at most one
  // virtual line in the soft cache. A load through a new alias invalidates
  // the old one strictly before its own ack.
  if (state_->switches.tlb_enabled && m.kind == LocalKind::Load) {
    auto old_vpn = proxy_.line_vpn(pline);
    std::uint64_t new_vpn = vpn_of(m.addr);
    if (old_vpn && *old_vpn != new_vpn) {
      bool ignore =
          fabric_.fault == FaultInjection::IgnoreSynonym && !synonym_fault_used_;
      if (ignore) {
        synonym_fault_used_ = true;
      } else {
        LocalMsg inv;
        inv.kind = LocalKind::Inv;
        inv.addr = *old_vpn * kPageBytes + page_off(pline);
        push_egress(std::move(inv));
      }
    }
  }

  CacheController::Access a;
  a.addr = paddr;
  a.size = m.size;
  a.value = m.value;
  a.trace = m.trace;
  a.op = m.kind == LocalKind::Load ? CacheController::AccessOp::Load
                                   : CacheController::AccessOp::Store;
  if (m.kind == LocalKind::Load && m.size == line_bytes) a.addr = pline;

  proxy_.access(a, [this, m, paddr, pline](const CacheController::Result& r) {
    // A LoadAck establishes soft-cache residency: tag the physical line
    // with its (sole) virtual alias. Stores don't allocate soft lines.
    if (m.kind == LocalKind::Load) proxy_.set_vpn(pline, vpn_of(m.addr));

    LocalMsg ack;
    ack.addr = m.addr;
    ack.size = m.size;
    ack.paddr = paddr;
    ack.trace = m.trace;
    if (m.kind == LocalKind::Load) {
      ++loads_served;
      ack.kind = LocalKind::LoadAck;
      ack.data = r.bytes;
      ack.value = r.value;
    } else {
      ++stores_served;
      ack.kind = LocalKind::StoreAck;
    }
    bool duplicate = fabric_.fault == FaultInjection::DuplicateStoreAck &&
                     ack.kind == LocalKind::StoreAck && !dup_ack_fault_used_;
    push_egress(ack);
    if (duplicate) {
      dup_ack_fault_used_ = true;
      LocalMsg dup = ack;
      dup.seq = next_egress_seq_ - 1;  // replays the same logical message
      egress_backlog_.push_back(std::move(dup));
      pump_egress();
    }
  });
}

SimTime MemoryHub::inv_deadline() const {
  // Worst-case delivery of an egress Inv: it queues behind a full FIFO plus
  // the backlog, each entry consumed one per FPGA edge, plus synchronizer
  // latency. Doubled for slack — the bound only needs to be sound, not tight.
  std::uint64_t cycles =
      2 * (params_.sync_stages + 2 * params_.fifo_capacity +
           egress_backlog_.size() + 4);
  return fabric_.engine().now() + cycles * fpga_.period_ps();
}

void MemoryHub::on_line_invalidated(std::uint64_t line, bool vpn_valid,
                                    std::uint64_t vpn) {
  if (!vpn_valid || !state_->switches.forward_invalidations) return;
  coherence::Scoreboard* sb = state_->scoreboard();
  std::uint64_t vline = vpn * kPageBytes + page_off(line);
  if (sb) sb->on_required_soft_inv(hub_id_, vline, inv_deadline());
  if (fabric_.fault == FaultInjection::SkipInvForward && !skip_inv_fault_used_) {
    skip_inv_fault_used_ = true;
    return;
  }
  LocalMsg inv;
  inv.kind = LocalKind::Inv;
  inv.addr = vline;
  push_egress(std::move(inv));
  ++invs_forwarded;
}

void MemoryHub::on_line_downgraded(std::uint64_t) {
  // Write-through soft caches never hold dirty data, so a downgrade to S
  // leaves the soft copy valid; nothing is forwarded.
}

void MemoryHub::push_egress(LocalMsg m) {
  m.seq = next_egress_seq_++;
  if (state_->scoreboard())
    state_->scoreboard()->on_local_send(hub_id_, m.seq,
                                        fabric_.engine().now());
  egress_backlog_.push_back(std::move(m));
  pump_egress();
}

void MemoryHub::pump_egress() {
  while (!egress_backlog_.empty()) {
    if (!egress_.push(egress_backlog_.front())) break;
    egress_backlog_.pop_front();
    if (fabric_.fault == FaultInjection::ReorderFifo && !reorder_fault_used_ &&
        egress_.size() >= 2) {
      reorder_fault_used_ = true;
      egress_.corrupt_reorder_head();
    }
  }
  if (!egress_backlog_.empty() && !pump_armed_) {
    pump_armed_ = true;
    // Retry when the consumer has had a chance to drain an entry.
    fabric_.engine().schedule_in_cycles(fpga_, 1, [this] {
      pump_armed_ = false;
      pump_egress();
    });
  }
}

}  // namespace duet::adapter
