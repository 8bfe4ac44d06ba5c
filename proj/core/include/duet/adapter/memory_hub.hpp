#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "duet/adapter/local_protocol.hpp"
#include "duet/adapter/tlb.hpp"
#include "duet/coherence/cache.hpp"

namespace duet::adapter {

enum ErrorCode : int {
  kErrNone = 0,
  kErrTimeout = 1,
  kErrParity = 2,
  kErrKilled = 3,
};

struct FeatureSwitches {
  bool forward_invalidations = true;
  bool tlb_enabled = false;
  bool atomics_enabled = false;
  std::uint64_t timeout_limit = 1'000'000;  // FPGA cycles, normal accesses
};

/// State shared by all hubs of one Duet Adapter: the active flag, the
/// latched error code and the feature switches. Deactivation stops request
/// intake at every Memory Hub and turns Control Hub responses into bogus
/// data while the Proxy Caches keep answering coherence traffic.
class AdapterState {
 public:
  AdapterState(int adapter_id, coherence::Scoreboard* sb)
      : adapter_id_(adapter_id), sb_(sb) {}

  int adapter_id() const { return adapter_id_; }
  bool active() const { return active_; }
  int error_code() const { return error_; }
  FeatureSwitches switches;

  void deactivate(int code, duet::sim::SimTime t) {
    if (!active_) return;
    active_ = false;
    error_ = code;
    if (sb_) sb_->on_adapter_deactivated(adapter_id_, t);
    for (auto& f : deactivate_hooks_) f();
  }

  /// Components needing cleanup on deactivation (e.g. the Control Hub
  /// unblocking pending reads with bogus data) register here.
  void add_deactivate_hook(std::function<void()> f) {
    deactivate_hooks_.push_back(std::move(f));
  }

  /// Clear-error MMIO path: error code reset, hubs accept requests again.
  void reactivate() {
    active_ = true;
    error_ = kErrNone;
    if (sb_) sb_->on_adapter_reactivated(adapter_id_);
  }

  coherence::Scoreboard* scoreboard() { return sb_; }

 private:
  int adapter_id_;
  bool active_ = true;
  int error_ = kErrNone;
  coherence::Scoreboard* sb_;
  std::vector<std::function<void()>> deactivate_hooks_;
};

struct HubParams {
  std::size_t fifo_capacity = 8;
  unsigned sync_stages = 2;
  unsigned mshr_entries = 8;
  std::uint64_t tlb_handler_delay_cycles = 200;  // sys cycles
  int interrupt_target_proc = 0;
};

/// What the soft logic sees of its memory interface: Load/Store in, acks and
/// invalidations out. The Duet Memory Hub and the FPSoC slow-cache port both
/// implement it, so accelerator engines are platform-agnostic.
class LocalPort {
 public:
  virtual ~LocalPort() = default;
  virtual bool request(LocalMsg m) = 0;
  virtual void set_efpga_sink(FifoPort::Sink s) = 0;
  virtual coherence::Fabric& fabric() = 0;
  virtual AdapterState& state() = 0;
  virtual int hub_id() const = 0;
  virtual const duet::sim::ClockDomain& fpga_domain() const = 0;
  virtual std::uint64_t served_loads() const = 0;
};

/// One Memory Hub: a Proxy Cache (the coherence module's cache controller in
/// the fast domain) bridged to the soft logic by two async FIFOs, with TLB
/// translation, synonym resolution and the parity half of the exception
/// monitor. The hub answers NoC coherence entirely in the fast domain and
/// never waits for the soft cache.
class MemoryHub : public coherence::CacheController::Listener,
                  public LocalPort {
 public:
  MemoryHub(coherence::Fabric& fabric, const duet::sim::ClockDomain& fpga,
            duet::noc::TileId tile, int hub_id,
            std::shared_ptr<AdapterState> state, HubParams params = {});

  /// eFPGA-side request entry (Load/Store), called on FPGA edges by the soft
  /// cache or a streaming accelerator. False = FIFO backpressure, retry.
  bool request(LocalMsg m) override;

  /// eFPGA-side delivery of LoadAck/StoreAck/Inv.
  void set_efpga_sink(FifoPort::Sink s) override {
    egress_.set_sink(std::move(s));
  }

  void handle_noc(const duet::noc::NocMessage& msg) { proxy_.handle_noc(msg); }

  coherence::CacheController& proxy() { return proxy_; }
  coherence::Fabric& fabric() override { return fabric_; }
  Tlb& tlb() { return tlb_; }
  AdapterState& state() override { return *state_; }
  int hub_id() const override { return hub_id_; }
  const duet::sim::ClockDomain& fpga_domain() const override { return fpga_; }
  std::uint64_t served_loads() const override { return loads_served; }

  /// Flips the parity bit of the next eFPGA request, modeling a soft-logic
  /// output glitch for exception-monitor testing.
  bool corrupt_next_parity = false;

  std::uint64_t loads_served = 0;
  std::uint64_t stores_served = 0;
  std::uint64_t invs_forwarded = 0;
  std::uint64_t page_faults = 0;

  // CacheController::Listener (coherence-driven invalidations/evictions)
  void on_line_invalidated(std::uint64_t line, bool vpn_valid,
                           std::uint64_t vpn) override;
  void on_line_downgraded(std::uint64_t line) override;

 private:
  void handle_local(const LocalMsg& m);
  void translate_and_serve(const LocalMsg& m, unsigned fault_round);
  void serve(LocalMsg m, std::uint64_t paddr);
  void push_egress(LocalMsg m);
  void pump_egress();
  duet::sim::SimTime inv_deadline() const;

  coherence::Fabric& fabric_;
  const duet::sim::ClockDomain& fpga_;
  int hub_id_;
  std::shared_ptr<AdapterState> state_;
  HubParams params_;
  coherence::CacheController proxy_;
  Tlb tlb_;
  FifoPort ingress_;  // eFPGA -> hub, consumed in the fast domain
  FifoPort egress_;   // hub -> eFPGA, consumed in the FPGA domain
  std::deque<LocalMsg> egress_backlog_;  // waiting for FIFO space
  bool pump_armed_ = false;
  std::uint64_t next_egress_seq_ = 0;
  bool reorder_fault_used_ = false;
  bool skip_inv_fault_used_ = false;
  bool dup_ack_fault_used_ = false;
  bool synonym_fault_used_ = false;
};

}  // namespace duet::adapter
