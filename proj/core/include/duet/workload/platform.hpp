#pragma once

#include <memory>
#include <string>
#include <vector>

#include "duet/accel/engines.hpp"
#include "duet/adapter/fpsoc_port.hpp"
#include "duet/adapter/soft_cache.hpp"
#include "duet/coherence/directory.hpp"
#include "duet/workload/cpu.hpp"

namespace duet::workload {

enum class Mode { ProcessorOnly, Fpsoc, Duet };

struct PlatformParams {
  Mode mode = Mode::ProcessorOnly;
  unsigned n_cpus = 1;
  std::string accel;          // accelerator descriptor name; empty = none
  std::uint64_t fpga_hz = 0;  // 0 = the descriptor's maximum frequency
  unsigned sort_n = 32;
  coherence::CacheConfig cache;
  adapter::HubParams hub;
  adapter::ControlParams ctl;
};

/// One fully assembled simulated machine: mesh, directory, memory, n cores,
/// and (on fpsoc/duet) one adapter plus the chosen accelerator engine. The
/// three modes share everything except the adapter's memory path and the
/// shadow-register policy, which is exactly the comparison the platform
/// sweep is after.
class Platform {
 public:
  explicit Platform(PlatformParams p);

  sim::Engine& engine() { return engine_; }
  const sim::ClockDomain& sys() const { return sys_; }
  const sim::ClockDomain* fpga() const { return fpga_; }
  coherence::Fabric& fabric() { return *fabric_; }
  coherence::Scoreboard& scoreboard() { return sb_; }
  noc::Mesh& mesh() { return *mesh_; }

  unsigned n_cpus() const { return unsigned(cpus_.size()); }
  Cpu& cpu(unsigned i) { return *cpus_.at(i); }

  adapter::ControlHub& ctl() { return *ctl_; }
  duet::noc::TileId ctl_tile() const { return ctl_tile_; }
  std::uint64_t reg_addr(std::uint64_t reg) const {
    return ctl_->mmio_addr(reg);
  }
  adapter::LocalPort& port(unsigned i = 0);
  unsigned n_ports() const { return unsigned(hubs_.size() + fports_.size()); }
  adapter::AdapterState& adapter_state() { return *state_; }
  accel::EngineBase* accel_engine() { return engine_impl_.get(); }
  const PlatformParams& params() const { return params_; }

  coherence::MemoryController& memory() { return *mem_; }

  /// Drains the event queue and runs every quiescence audit. True = clean.
  bool quiesce_and_check();

 private:
  PlatformParams params_;
  sim::Engine engine_;
  sim::ClockDomain& sys_;
  sim::ClockDomain* fpga_ = nullptr;
  std::unique_ptr<noc::Mesh> mesh_;
  coherence::Scoreboard sb_;
  std::unique_ptr<coherence::Fabric> fabric_;
  std::vector<std::unique_ptr<Cpu>> cpus_;
  std::unique_ptr<coherence::DirectoryShard> dir_;
  std::unique_ptr<coherence::MemoryController> mem_;
  std::shared_ptr<adapter::AdapterState> state_;
  std::vector<std::unique_ptr<adapter::MemoryHub>> hubs_;
  std::vector<std::unique_ptr<adapter::FpsocMemPort>> fports_;
  std::unique_ptr<adapter::ControlHub> ctl_;
  std::unique_ptr<accel::EngineBase> engine_impl_;
  duet::noc::TileId ctl_tile_{};
};

}  // namespace duet::workload
