#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duet/workload/platform.hpp"

namespace duet::workload {

/// A machine configuration label, "P<p>M<m>": p processors driving the
/// benchmark, m adapter memory ports available to the accelerator.
struct DollyInstance {
  unsigned p = 1;
  unsigned m = 1;
};

DollyInstance parse_instance(const std::string& s);
std::string instance_name(const DollyInstance& d);

struct BenchResult {
  std::string name;
  Mode mode = Mode::ProcessorOnly;
  unsigned n_procs = 1;
  std::uint64_t runtime_ps = 0;
  /// Functional outputs; identical across platforms for the same seed.
  std::vector<std::uint64_t> outputs;
  std::uint64_t digest = 0;  // FNV-1a over outputs
  /// BFS only: frontier levels and mean time per level.
  unsigned steps = 0;
  double per_step_ps = 0.0;
  bool coherent = false;  // scoreboard clean after the run
  /// Warm/cold discipline evidence, sampled when timing starts: processor
  /// cache hits from the setup phase, and whether the accelerator-side
  /// memory ports were still untouched.
  std::uint64_t warm_hits = 0;
  bool accel_cold = true;
};

std::uint64_t fnv1a(const std::vector<std::uint64_t>& words);

/// Benchmark base names; pdes and bfs additionally take the processor count
/// from the instance (p ∈ {4, 8, 16}), the rest run on one processor.
const std::vector<std::string>& benchmark_names();

/// Runs one benchmark cell. fpga_hz = 0 picks the accelerator's rated
/// maximum frequency. Throws std::invalid_argument on an unknown name or an
/// instance/benchmark mismatch (e.g. sort needs M2).
BenchResult run_benchmark(const std::string& name, Mode mode,
                          DollyInstance inst, std::uint64_t fpga_hz = 0,
                          std::uint64_t seed = 1);

}  // namespace duet::workload
