#pragma once

#include "duet/adapter/cdc_noc_bridge.hpp"
#include "duet/adapter/memory_hub.hpp"

namespace duet::adapter {

/// The FPSoC baseline's memory interface: the accelerator's cache lives in
/// the slow fabric domain (a CdcNocBridge), so local accesses stay inside
/// the FPGA clock while every coherence message pays the crossing. Presents
/// the same LocalPort face as a Memory Hub, letting the accelerator engines
/// run unchanged on either platform.
class FpsocMemPort : public LocalPort,
                     public coherence::CacheController::Listener {
 public:
  FpsocMemPort(coherence::Fabric& fabric, const duet::sim::ClockDomain& fpga,
               duet::noc::TileId tile, int hub_id,
               std::shared_ptr<AdapterState> state,
               std::size_t fifo_capacity = 64, unsigned sync_stages = 2)
      : fabric_(fabric),
        fpga_(fpga),
        hub_id_(hub_id),
        state_(std::move(state)),
        bridge_(fabric, fpga, tile, fifo_capacity, sync_stages) {
    bridge_.controller().set_listener(this);
    bridge_.controller().set_mshr_limit(2);
  }

  bool request(LocalMsg m) override;

  void set_efpga_sink(FifoPort::Sink s) override { sink_ = std::move(s); }
  coherence::Fabric& fabric() override { return fabric_; }
  AdapterState& state() override { return *state_; }
  int hub_id() const override { return hub_id_; }
  const duet::sim::ClockDomain& fpga_domain() const override { return fpga_; }
  std::uint64_t served_loads() const override { return loads_served; }

  coherence::CacheController& slow_cache() { return bridge_.controller(); }

  std::uint64_t loads_served = 0;
  std::uint64_t stores_served = 0;

  void on_line_invalidated(std::uint64_t line, bool vpn_valid,
                           std::uint64_t vpn) override;
  void on_line_downgraded(std::uint64_t) override {}

 private:
  coherence::Fabric& fabric_;
  const duet::sim::ClockDomain& fpga_;
  int hub_id_;
  std::shared_ptr<AdapterState> state_;
  CdcNocBridge bridge_;
  FifoPort::Sink sink_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace duet::adapter
