#pragma once

#include <bit>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <vector>

#include "duet/accel/descriptor.hpp"
#include "duet/accel/tangent_pwl.hpp"
#include "duet/adapter/control_hub.hpp"
#include "duet/adapter/soft_cache.hpp"
#include "duet/sim/task.hpp"

namespace duet::accel {

inline std::uint64_t bits_of(double d) { return std::bit_cast<std::uint64_t>(d); }
inline double double_of(std::uint64_t b) { return std::bit_cast<double>(b); }

/// Streaming eFPGA-side client of one Memory Hub: queues local-protocol
/// requests, issues at most one per FPGA edge (pipeline initiation interval
/// 1), retries on FIFO backpressure and routes acks back by address.
class HubPort {
 public:
  using AckFn = std::function<void(const adapter::LocalMsg&)>;

  HubPort(duet::sim::Engine& engine, const duet::sim::ClockDomain& fpga,
          adapter::LocalPort& hub);

  void issue(adapter::LocalMsg m, AckFn on_ack);

 private:
  void pump();
  void on_egress(const adapter::LocalMsg& m);

  duet::sim::Engine& engine_;
  const duet::sim::ClockDomain& fpga_;
  adapter::LocalPort& hub_;
  std::deque<std::pair<adapter::LocalMsg, AckFn>> sendq_;
  // Acks carry the request address; same-address requests resolve FIFO.
  std::map<std::pair<int, std::uint64_t>, std::deque<AckFn>> waiting_;
  bool pump_armed_ = false;
};

/// Base wiring shared by the engine models: register definitions from the
/// descriptor and the FPGA-bound work notification.
class EngineBase {
 public:
  EngineBase(adapter::ControlHub& ctl, duet::sim::Engine& engine,
             const duet::sim::ClockDomain& fpga,
             const AcceleratorDescriptor& desc);
  virtual ~EngineBase() = default;

  const AcceleratorDescriptor& descriptor() const { return desc_; }

 protected:
  virtual void on_work(std::uint64_t reg) = 0;
  void finish_after(std::uint64_t fpga_cycles, std::function<void()> fn);

  adapter::ControlHub& ctl_;
  duet::sim::Engine& engine_;
  const duet::sim::ClockDomain& fpga_;
  AcceleratorDescriptor desc_;
};

/// Pure-compute PWL tangent: argument bits in, value bits (or the NaN error
/// flag) out, a fixed pipeline depth later.
class TangentEngine : public EngineBase {
 public:
  TangentEngine(adapter::ControlHub& ctl, duet::sim::Engine& engine,
                const duet::sim::ClockDomain& fpga,
                std::uint64_t pipeline_depth = 8);

  const TangentPwl& table() const { return pwl_; }

 private:
  void on_work(std::uint64_t reg) override;
  TangentPwl pwl_;
  std::uint64_t depth_;
};

/// Counts set bits in a 512-bit vector fetched as four full cachelines.
class PopcountEngine : public EngineBase {
 public:
  PopcountEngine(adapter::ControlHub& ctl, adapter::LocalPort& hub,
                 duet::sim::Engine& engine,
                 const duet::sim::ClockDomain& fpga);

 private:
  void on_work(std::uint64_t reg) override;
  HubPort port_;
  std::uint32_t line_bytes_;
};

/// Sorting network model: streams the input array through one hub, sorts,
/// and streams the result out through the other (8-byte store limit).
class SortEngine : public EngineBase {
 public:
  SortEngine(adapter::ControlHub& ctl, adapter::LocalPort& read_hub,
             adapter::LocalPort& write_hub, duet::sim::Engine& engine,
             const duet::sim::ClockDomain& fpga, unsigned n);

  unsigned n() const { return n_; }

 private:
  void on_work(std::uint64_t reg) override;
  void port_issue_read(const adapter::LocalMsg& m, std::uint64_t src,
                       std::shared_ptr<std::vector<std::uint8_t>> buf,
                       std::shared_ptr<unsigned> remaining, std::uint64_t dst,
                       std::uint64_t total);
  HubPort read_port_;
  HubPort write_port_;
  unsigned n_;
  std::uint32_t line_bytes_;
};

/// Single-source shortest paths over a CSR graph of 8-byte entries, reading
/// through a soft cache to exploit locality across invocations.
class DijkstraEngine : public EngineBase {
 public:
  DijkstraEngine(adapter::ControlHub& ctl, adapter::LocalPort& hub,
                 duet::sim::Engine& engine,
                 const duet::sim::ClockDomain& fpga);

  adapter::SoftCache& soft() { return soft_; }

 private:
  void on_work(std::uint64_t reg) override;
  duet::sim::Task run(std::uint64_t source);
  adapter::SoftCache soft_;
};

/// Gravitational force kernels for the tree code: exact pairwise
/// (CalcForce) and center-of-mass monopole (ApproxForce), both softened.
class BarnesHutEngine : public EngineBase {
 public:
  static constexpr double kSoftening = 1e-3;
  static constexpr double kG = 1.0;
  // Work item: bit 63 selects the kernel, bits 62..32 index A (particle or
  // tree node), bits 31..0 index particle B.
  static std::uint64_t work_item(bool approx, std::uint32_t a,
                                 std::uint32_t b) {
    return (std::uint64_t(approx) << 63) | (std::uint64_t(a) << 32) | b;
  }

  BarnesHutEngine(adapter::ControlHub& ctl, adapter::LocalPort& hub,
                  duet::sim::Engine& engine,
                  const duet::sim::ClockDomain& fpga);

 private:
  void on_work(std::uint64_t reg) override;
  duet::sim::Task run(std::uint64_t item);
  duet::sim::Future<std::vector<std::uint8_t>> load_line(std::uint64_t addr);
  HubPort port_;
  std::uint32_t line_bytes_;
};

/// Hardware FIFO queue shared by the frontier-processing CPUs: pushes enter
/// through the FPGA-bound FIFO, pops consume a token then read the data
/// FIFO. Overflow surfaces as MMIO backpressure on the push.
class LockfreeQueueEngine : public EngineBase {
 public:
  LockfreeQueueEngine(adapter::ControlHub& ctl, duet::sim::Engine& engine,
                      const duet::sim::ClockDomain& fpga);

 private:
  void on_work(std::uint64_t reg) override;
};

/// Conservative event scheduler: CPUs push pointers to event records; the
/// engine fetches each record's timestamp through its hub and serves
/// next() (a normal-register read) in timestamp order.
class PdesEngine : public EngineBase {
 public:
  PdesEngine(adapter::ControlHub& ctl, adapter::LocalPort& hub,
             duet::sim::Engine& engine, const duet::sim::ClockDomain& fpga);

  std::uint64_t horizon() const { return horizon_; }
  std::uint64_t schedule_errors() const { return errors_; }

 private:
  void on_work(std::uint64_t reg) override;
  void serve_next(adapter::ControlHub::DeviceRespond respond);

  HubPort port_;
  std::uint32_t line_bytes_;
  using Entry = std::pair<std::uint64_t, std::uint64_t>;  // (timestamp, ptr)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready_;
  std::uint64_t horizon_ = 0;
  std::uint64_t errors_ = 0;
};

}  // namespace duet::accel
