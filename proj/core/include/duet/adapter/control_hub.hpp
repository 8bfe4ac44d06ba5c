#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "duet/adapter/local_protocol.hpp"
#include "duet/adapter/memory_hub.hpp"
#include "duet/coherence/fabric.hpp"

namespace duet::adapter {

enum class RegKind : std::uint8_t {
  Normal,        // lives on the FPGA side only; every access crosses twice
  Plain,         // shadowed last-written value, mirrored in the fast domain
  FpgaBoundFifo, // shadowed bounded queue toward the accelerator
  CpuBoundFifo,  // accelerator -> CPU data, blocking read with timeout
  TokenFifo,     // non-blocking counter; read consumes a token or "empty"
};

/// Distinguished value returned by a token-FIFO read when no token is
/// available and by bogus responses after deactivation.
constexpr std::uint64_t kEmptyToken = ~0ull;
constexpr std::uint64_t kBogusValue = 0xB06D'B06D'B06D'B06Dull;

/// MMIO response status codes (carried in the NocMessage size field).
enum MmioStatus : std::uint32_t {
  kStatusOk = 0,
  kStatusTimeout = 1,
  kStatusParity = 2,
  kStatusKilled = 3,
  kStatusBusy = 4,
};

struct ControlParams {
  std::uint64_t mmio_base = 0xF000'0000;
  std::size_t fifo_capacity = 8;
  unsigned sync_stages = 2;
  std::uint64_t decode_cycles = 1;        // sys cycles before any handling
  std::uint64_t shadow_ack_cycles = 1;    // extra fast-domain cycles
  std::uint64_t device_cycles = 8;        // FPGA cycles per forwarded op
  std::uint64_t blocking_timeout_cycles = 1'000'000;  // sys cycles
  /// FPSoC baseline: no fast-domain shadows. Shadow-kind accesses keep
  /// their semantics but the response only leaves after a full round trip
  /// through the FPGA-bound stream, like a normal register.
  bool downgrade_shadows = false;
};

/// The Control Hub: soft-register interface between processors (over MMIO
/// NoC messages) and the accelerator. Shadowed register kinds complete in
/// the fast domain; normal accesses cross into the FPGA domain and back.
/// All FPGA-bound work funnels through one in-order stream, so the
/// accelerator observes accesses in issue order; responses to one processor
/// are returned in that processor's issue order.
class ControlHub {
 public:
  /// Control registers handled in the hub itself, active or not.
  static constexpr std::uint64_t kErrorReg = 1000;  // read code / write clears

  ControlHub(coherence::Fabric& fabric, const duet::sim::ClockDomain& fpga,
             duet::noc::TileId tile, std::shared_ptr<AdapterState> state,
             ControlParams params = {});

  void define_register(std::uint64_t reg, RegKind kind);

  void handle_noc(const duet::noc::NocMessage& msg);

  // ---- accelerator-side interface (FPGA domain) -----------------------

  /// Proactive refresh of a plain shadow register's fast-domain mirror.
  void set_shadow(std::uint64_t reg, std::uint64_t value);
  /// Push data toward a blocked (or future) CPU read of a cpu_bound_fifo.
  void push_cpu_bound(std::uint64_t reg, std::uint64_t value);
  void add_tokens(std::uint64_t reg, std::uint64_t n = 1);
  /// Pop the oldest value a CPU pushed into an fpga_bound_fifo register.
  std::optional<std::uint64_t> pop_fpga_bound(std::uint64_t reg);
  /// FPGA-side value of a plain register (what the stream has delivered).
  std::uint64_t device_reg(std::uint64_t reg) const {
    auto it = device_regs_.find(reg);
    return it == device_regs_.end() ? 0 : it->second;
  }
  /// Called on FPGA-side arrival of any forwarded access (issue order).
  void set_fpga_observer(
      std::function<void(std::uint64_t reg, bool is_write, std::uint64_t)> f) {
    fpga_observer_ = std::move(f);
  }
  /// Replaces the built-in normal-register device model. The handler must
  /// eventually call respond(value) (reads) / respond(0) (writes); if it
  /// never does, the timeout monitor fires.
  using DeviceRespond = std::function<void(std::uint64_t)>;
  using DeviceHandler = std::function<void(std::uint64_t reg, bool is_write,
                                           std::uint64_t value,
                                           DeviceRespond respond)>;
  void set_device_handler(DeviceHandler h) { device_ = std::move(h); }
  /// Fires (FPGA domain) whenever a value lands in an fpga_bound_fifo, so
  /// accelerator models can react without polling every edge.
  void set_fpga_bound_notify(std::function<void(std::uint64_t reg)> f) {
    fb_notify_ = std::move(f);
  }

  std::uint64_t mmio_addr(std::uint64_t reg) const {
    return params_.mmio_base + reg * 8;
  }
  AdapterState& state() { return *state_; }

  std::uint64_t accesses_served = 0;
  std::uint64_t timeouts = 0;

 private:
  struct Txn {
    int proc_key;  // src tile index
    duet::noc::TileId reply_to;
    std::uint64_t req_id;
    std::uint64_t reg;
    bool is_write;
    std::uint64_t value;
    duet::sim::PhaseLogPtr trace;
    bool done = false;
    std::uint64_t resp_value = 0;
    std::uint32_t status = kStatusOk;
    std::uint64_t stamp = 0;  // guards the blocking-read timeout
  };
  using TxnPtr = std::shared_ptr<Txn>;

  struct StreamEntry {
    std::uint64_t stream_id = 0;
    std::uint64_t reg = 0;
    bool is_write = false;
    std::uint64_t value = 0;
    bool needs_response = false;  // normal accesses awaiting the round trip
    bool echo = false;  // downgraded shadow: device just bounces it back
    duet::sim::PhaseLogPtr trace;
  };

  /// FPGA -> fast-domain return traffic (all of it pays the CDC crossing).
  struct ReturnMsg {
    enum Type { NormalResp, CpuBoundPush, TokenAdd, ShadowRefresh } type;
    std::uint64_t reg = 0;
    std::uint64_t value = 0;
    std::uint64_t stream_id = 0;
    duet::sim::PhaseLogPtr trace;
  };

  void start(const TxnPtr& t);
  void finish_shadow(const TxnPtr& t, std::uint64_t value,
                     std::uint32_t status);
  void complete(const TxnPtr& t, std::uint64_t value, std::uint32_t status);
  void flush_responses(int proc_key);
  void enqueue_stream(StreamEntry e);
  void pump_stream();
  void fpga_arrive(const StreamEntry& e);
  void run_device();
  void send_return(ReturnMsg m);
  void pump_return();
  void handle_return(const ReturnMsg& m);
  void bogus(const TxnPtr& t);
  void flush_blocked(std::uint32_t status);

  coherence::Fabric& fabric_;
  const duet::sim::ClockDomain& fpga_;
  duet::noc::TileId tile_;
  std::shared_ptr<AdapterState> state_;
  ControlParams params_;

  std::map<std::uint64_t, RegKind> kinds_;
  std::map<std::uint64_t, std::uint64_t> mirror_;       // plain shadows
  std::map<std::uint64_t, std::uint64_t> tokens_;       // token FIFOs
  std::map<std::uint64_t, std::deque<std::uint64_t>> cpu_bound_;
  std::map<std::uint64_t, std::deque<std::uint64_t>> fpga_bound_;  // FPGA side
  std::map<std::uint64_t, std::deque<TxnPtr>> blocked_reads_;

  std::map<int, std::deque<TxnPtr>> per_proc_;  // completion-order queues

  // FPGA-bound forward stream: the fast-domain backlog, the CDC FIFO and
  // the return path. Stream entries are keyed so responses find their txn.
  std::deque<StreamEntry> stream_backlog_;
  CdcPort<StreamEntry> to_fpga_;
  CdcPort<ReturnMsg> from_fpga_;
  std::deque<ReturnMsg> return_backlog_;
  std::map<std::uint64_t, TxnPtr> inflight_normal_;
  std::map<std::uint64_t, std::uint32_t> inflight_status_;  // non-Ok echoes
  std::map<std::uint64_t, std::uint64_t> fb_credits_;  // fpga_bound slots
  std::uint64_t next_stream_id_ = 0;
  bool stream_pump_armed_ = false;
  bool return_pump_armed_ = false;
  bool device_busy_ = false;
  std::deque<StreamEntry> device_queue_;  // FPGA side, awaiting the device
  std::uint64_t stamp_gen_ = 0;

  std::function<void(std::uint64_t, bool, std::uint64_t)> fpga_observer_;
  std::function<void(std::uint64_t)> fb_notify_;
  DeviceHandler device_;
  std::map<std::uint64_t, std::uint64_t> device_regs_;  // built-in device
};

}  // namespace duet::adapter
