#pragma once

#include "duet/adapter/local_protocol.hpp"
#include "duet/coherence/cache.hpp"
#include "duet/noc/mesh.hpp"

namespace duet::adapter {

/// FPSoC-style attachment: a coherent cache controller clocked in the slow
/// fabric domain, reached from the system NoC through a pair of clock
/// crossing FIFOs. Every NoC message in either direction pays the
/// synchronizer penalty, which is what makes this baseline slower than the
/// adapter's proxy-cache path.
class CdcNocBridge {
 public:
  CdcNocBridge(duet::coherence::Fabric& fabric,
               const duet::sim::ClockDomain& slow, duet::noc::TileId tile,
               std::size_t fifo_capacity = 64, unsigned sync_stages = 2)
      : ctrl_(fabric, slow, tile,
              // Directory audits name caches by mesh tile index.
              /*cache_id=*/tile.y * fabric.mesh().params().nx + tile.x,
              /*slow_domain=*/true),
        inbound_(fabric.engine(), fabric.sys(), slow, fifo_capacity,
                 sync_stages),
        outbound_(fabric.engine(), slow, fabric.sys(), fifo_capacity,
                  sync_stages) {
    inbound_.set_sink(
        [this](duet::noc::NocMessage m) { ctrl_.handle_noc(m); });
    outbound_.set_sink(
        [&fabric](duet::noc::NocMessage m) { fabric.mesh().send(m); });
    ctrl_.set_send_hook([this](duet::noc::NocMessage m) {
      if (!outbound_.push(std::move(m)))
        throw std::logic_error("CdcNocBridge outbound FIFO overflow");
    });
    fabric.mesh().attach(tile, [this](const duet::noc::NocMessage& m) {
      if (!inbound_.push(m))
        throw std::logic_error("CdcNocBridge inbound FIFO overflow");
    });
  }

  duet::coherence::CacheController& controller() { return ctrl_; }

 private:
  duet::coherence::CacheController ctrl_;
  CdcPort<duet::noc::NocMessage> inbound_;
  CdcPort<duet::noc::NocMessage> outbound_;
};

}  // namespace duet::adapter
