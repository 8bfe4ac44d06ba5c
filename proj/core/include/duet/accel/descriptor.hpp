#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "duet/adapter/control_hub.hpp"

namespace duet::accel {

/// Static facts about one soft accelerator: the post-route clock ceiling and
/// normalized silicon area (both measured on the real eFPGA flow), plus the
/// shape of its interface to the adapter.
struct AcceleratorDescriptor {
  std::string name;
  std::uint64_t max_freq_hz = 0;
  double norm_area = 0.0;  // relative to one core + cache slice
  unsigned pipeline_ii = 1;
  bool uses_soft_cache = false;
  unsigned num_memory_hubs = 0;
  std::vector<std::pair<std::uint64_t, adapter::RegKind>> register_map;
};

/// Soft register numbering shared by all engine models. Not every engine
/// uses every register.
enum AccelReg : std::uint64_t {
  kRegArg = 16,     // fpga_bound_fifo: work items / pointers
  kRegResult = 17,  // cpu_bound_fifo: results
  kRegParam0 = 18,  // plain: base addresses, sizes, sources
  kRegParam1 = 19,
  kRegParam2 = 20,
  kRegParam3 = 21,
  kRegParam4 = 22,
  kRegToken = 23,   // token_fifo: completion / availability signals
  kRegNext = 24,    // normal: demand-driven reads (PDES next())
  kRegStatus = 25,  // plain: engine-refreshed status (error counts etc.)
};

inline const std::vector<AcceleratorDescriptor>& accelerator_table() {
  using adapter::RegKind;
  static const std::vector<AcceleratorDescriptor> table = {
      {"tangent", 282'000'000, 0.47, 1, false, 0,
       {{kRegArg, RegKind::FpgaBoundFifo}, {kRegResult, RegKind::CpuBoundFifo}}},
      {"popcount", 189'000'000, 2.77, 1, false, 1,
       {{kRegArg, RegKind::FpgaBoundFifo}, {kRegResult, RegKind::CpuBoundFifo}}},
      {"sort32", 228'000'000, 6.29, 1, false, 2,
       {{kRegArg, RegKind::FpgaBoundFifo},
        {kRegResult, RegKind::CpuBoundFifo},
        {kRegParam0, RegKind::Plain},
        {kRegParam1, RegKind::Plain}}},
      {"sort64", 234'000'000, 8.10, 1, false, 2,
       {{kRegArg, RegKind::FpgaBoundFifo},
        {kRegResult, RegKind::CpuBoundFifo},
        {kRegParam0, RegKind::Plain},
        {kRegParam1, RegKind::Plain}}},
      {"sort128", 228'000'000, 10.27, 1, false, 2,
       {{kRegArg, RegKind::FpgaBoundFifo},
        {kRegResult, RegKind::CpuBoundFifo},
        {kRegParam0, RegKind::Plain},
        {kRegParam1, RegKind::Plain}}},
      {"dijkstra", 127'000'000, 1.94, 1, true, 1,
       {{kRegArg, RegKind::FpgaBoundFifo},
        {kRegResult, RegKind::CpuBoundFifo},
        {kRegParam0, RegKind::Plain},
        {kRegParam1, RegKind::Plain},
        {kRegParam2, RegKind::Plain},
        {kRegParam3, RegKind::Plain},
        {kRegParam4, RegKind::Plain}}},
      {"barneshut", 85'000'000, 14.22, 4, false, 1,
       {{kRegArg, RegKind::FpgaBoundFifo},
        {kRegResult, RegKind::CpuBoundFifo},
        {kRegParam0, RegKind::Plain},
        {kRegParam1, RegKind::Plain}}},
      {"bfs_queue", 208'000'000, 1.24, 1, false, 0,
       {{kRegArg, RegKind::FpgaBoundFifo},
        {kRegResult, RegKind::CpuBoundFifo},
        {kRegToken, RegKind::TokenFifo}}},
      {"pdes", 126'000'000, 2.77, 1, false, 1,
       {{kRegArg, RegKind::FpgaBoundFifo},
        {kRegNext, RegKind::Normal},
        {kRegStatus, RegKind::Plain}}},
  };
  return table;
}

inline const AcceleratorDescriptor& find_descriptor(const std::string& name) {
  for (const auto& d : accelerator_table())
    if (d.name == name) return d;
  throw std::invalid_argument("unknown accelerator: " + name);
}

}  // namespace duet::accel
