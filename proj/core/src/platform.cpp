#include "duet/workload/platform.hpp"

#include <stdexcept>

namespace duet::workload {

using duet::noc::TileId;

Platform::Platform(PlatformParams p)
    : params_(std::move(p)),
      sys_(engine_.register_domain("sys", 1'000'000'000, 0)),
      sb_(params_.cache.line_bytes) {
  const accel::AcceleratorDescriptor* desc = nullptr;
  if (!params_.accel.empty()) desc = &accel::find_descriptor(params_.accel);

  bool has_adapter = params_.mode != Mode::ProcessorOnly;
  if (has_adapter) {
    std::uint64_t hz = params_.fpga_hz;
    if (hz == 0) hz = desc ? desc->max_freq_hz : 250'000'000;
    fpga_ = &engine_.register_domain("fpga", hz, 0);
  }

  // Geometry: four tiles per row. CPU rows first, then a row with the
  // directory, memory controller and Control Hub, then a row of memory ports.
  unsigned nx = 4;
  unsigned cpu_rows = (params_.n_cpus + nx - 1) / nx;
  unsigned ny = cpu_rows + 2;
  mesh_ = std::make_unique<noc::Mesh>(engine_, sys_,
                                      noc::MeshParams{.nx = int(nx),
                                                      .ny = int(ny)});
  fabric_ = std::make_unique<coherence::Fabric>(engine_, *mesh_, sys_,
                                                params_.cache, &sb_);
  int infra_y = int(cpu_rows);
  int port_y = infra_y + 1;
  fabric_->add_shard_tile({0, infra_y});
  fabric_->set_memctl_tile({1, infra_y});

  for (unsigned i = 0; i < params_.n_cpus; ++i) {
    TileId t{int(i % nx), int(i / nx)};
    cpus_.push_back(std::make_unique<Cpu>(*fabric_, t));
  }
  dir_ = std::make_unique<coherence::DirectoryShard>(*fabric_,
                                                     TileId{0, infra_y});
  mesh_->attach({0, infra_y},
                [this](const noc::NocMessage& m) { dir_->handle_noc(m); });
  mem_ = std::make_unique<coherence::MemoryController>(*fabric_,
                                                       TileId{1, infra_y});
  mesh_->attach({1, infra_y},
                [this](const noc::NocMessage& m) { mem_->handle_noc(m); });

  if (!has_adapter) return;

  state_ = std::make_shared<adapter::AdapterState>(
      1, params_.mode == Mode::Duet ? &sb_ : nullptr);
  ctl_tile_ = {2, infra_y};
  adapter::ControlParams cp = params_.ctl;
  cp.downgrade_shadows = params_.mode == Mode::Fpsoc;
  ctl_ = std::make_unique<adapter::ControlHub>(*fabric_, *fpga_, ctl_tile_,
                                               state_, cp);
  mesh_->attach(ctl_tile_,
                [this](const noc::NocMessage& m) { ctl_->handle_noc(m); });

  unsigned n_ports = desc ? desc->num_memory_hubs : 1;
  for (unsigned i = 0; i < n_ports; ++i) {
    TileId t{int(i), port_y};
    if (params_.mode == Mode::Duet) {
      auto hub = std::make_unique<adapter::MemoryHub>(
          *fabric_, *fpga_, t, int(i + 1), state_, params_.hub);
      auto* raw = hub.get();
      mesh_->attach(t,
                    [raw](const noc::NocMessage& m) { raw->handle_noc(m); });
      hubs_.push_back(std::move(hub));
    } else {
      // The FPSoC port attaches its own CDC bridge to the mesh.
      fports_.push_back(std::make_unique<adapter::FpsocMemPort>(
          *fabric_, *fpga_, t, int(i + 1), state_));
    }
  }

  if (!desc) return;
  const std::string& name = desc->name;
  if (name == "tangent") {
    engine_impl_ =
        std::make_unique<accel::TangentEngine>(*ctl_, engine_, *fpga_);
  } else if (name == "popcount") {
    engine_impl_ = std::make_unique<accel::PopcountEngine>(*ctl_, port(0),
                                                           engine_, *fpga_);
  } else if (name.rfind("sort", 0) == 0) {
    params_.sort_n = unsigned(std::stoul(name.substr(4)));
    engine_impl_ = std::make_unique<accel::SortEngine>(
        *ctl_, port(0), port(1), engine_, *fpga_, params_.sort_n);
  } else if (name == "dijkstra") {
    engine_impl_ = std::make_unique<accel::DijkstraEngine>(*ctl_, port(0),
                                                           engine_, *fpga_);
  } else if (name == "barneshut") {
    engine_impl_ = std::make_unique<accel::BarnesHutEngine>(*ctl_, port(0),
                                                            engine_, *fpga_);
  } else if (name == "bfs_queue") {
    engine_impl_ =
        std::make_unique<accel::LockfreeQueueEngine>(*ctl_, engine_, *fpga_);
  } else if (name == "pdes") {
    engine_impl_ = std::make_unique<accel::PdesEngine>(*ctl_, port(0),
                                                       engine_, *fpga_);
  } else {
    throw std::invalid_argument("no engine model for accelerator " + name);
  }
}

adapter::LocalPort& Platform::port(unsigned i) {
  if (i < hubs_.size()) return *hubs_[i];
  if (i < fports_.size()) return *fports_[i];
  throw std::out_of_range("adapter memory port index");
}

bool Platform::quiesce_and_check() {
  engine_.run_to_exhaustion();
  for (auto& c : cpus_) c->cache().audit();
  for (auto& h : hubs_) h->proxy().audit();
  for (auto& f : fports_) f->slow_cache().audit();
  dir_->audit();
  sb_.finish_audit(engine_.now());
  return sb_.ok();
}

}  // namespace duet::workload
