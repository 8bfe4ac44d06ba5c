#pragma once

#include <cstdint>
#include <string>

namespace duet::workload {

/// The six communication mechanisms of the single-transaction latency study.
/// Pull mechanisms are arranged to miss in the requesting cache and hit the
/// other party's private cache in Modified state.
enum class Mechanism {
  NormalReg,
  ShadowReg,
  EfpgaPullSlow,
  EfpgaPullProxy,
  CpuPullSlow,
  CpuPullProxy,
};

const char* mechanism_name(Mechanism m);
Mechanism mechanism_from_name(const std::string& s);

struct LatencyBreakdown {
  std::uint64_t total_ps = 0;
  std::uint64_t noc_ps = 0;
  std::uint64_t fast_cache_ps = 0;
  std::uint64_t slow_cache_ps = 0;
  std::uint64_t cdc_ps = 0;
  std::uint64_t attributed() const {
    return noc_ps + fast_cache_ps + slow_cache_ps + cdc_ps;
  }
};

/// One transaction, one processor; returns the round trip and its phase
/// attribution. Builds a fresh platform per call, so results are functions
/// of (mechanism, frequency) alone.
LatencyBreakdown probe_latency(Mechanism m, std::uint64_t fpga_hz);

/// 512 quadwords through two 4 KB buffers; returns bytes/second of the
/// pull direction named by the mechanism.
double probe_bandwidth(Mechanism m, std::uint64_t fpga_hz);

struct ContentionPoint {
  double normal_bw = 0;  // per-processor bytes/sec, normal register
  double shadow_bw = 0;  // per-processor bytes/sec, shadowed register
};

/// n processors hammering the same soft register, FPGA fixed at 500 MHz.
ContentionPoint probe_contention(unsigned n_processors);

}  // namespace duet::workload
