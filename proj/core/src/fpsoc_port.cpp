#include "duet/adapter/fpsoc_port.hpp"

#include <stdexcept>

namespace duet::adapter {

using coherence::CacheController;

bool FpsocMemPort::request(LocalMsg m) {
  if (m.kind != LocalKind::Load && m.kind != LocalKind::Store)
    throw std::logic_error("only Load/Store may enter the FPSoC port");
  if (!state_->active()) return true;  // exception latched: dropped

  std::uint32_t lb = fabric_.config().line_bytes;
  std::uint64_t pline = coherence::line_of(m.addr, lb);

  CacheController::Access a;
  a.addr = m.addr;
  a.size = m.size;
  a.value = m.value;
  a.trace = m.trace;
  a.op = m.kind == LocalKind::Load ? CacheController::AccessOp::Load
                                   : CacheController::AccessOp::Store;
  if (m.kind == LocalKind::Load && m.size == lb) a.addr = pline;

  bridge_.controller().access(
      a, [this, m, pline](const CacheController::Result& r) {
        // Identity virtual tag: invalidation forwarding still needs the
        // reverse map even without address translation.
        if (m.kind == LocalKind::Load)
          bridge_.controller().set_vpn(pline, vpn_of(m.addr));
        LocalMsg ack;
        ack.addr = m.addr;
        ack.size = m.size;
        ack.paddr = m.addr;
        ack.trace = m.trace;
        ack.seq = next_seq_++;
        if (m.kind == LocalKind::Load) {
          ++loads_served;
          ack.kind = LocalKind::LoadAck;
          ack.data = r.bytes;
          ack.value = r.value;
        } else {
          ++stores_served;
          ack.kind = LocalKind::StoreAck;
        }
        if (sink_) sink_(ack);
      });
  return true;  // a same-domain cache port has no FIFO to fill
}

void FpsocMemPort::on_line_invalidated(std::uint64_t line, bool vpn_valid,
                                       std::uint64_t vpn) {
  if (!vpn_valid || !sink_) return;
  LocalMsg inv;
  inv.kind = LocalKind::Inv;
  inv.addr = vpn * kPageBytes + page_off(line);
  inv.seq = next_seq_++;
  sink_(inv);
}

}  // namespace duet::adapter
