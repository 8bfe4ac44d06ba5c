#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "duet/sim/time.hpp"

namespace duet::sim {

/// A free-running clock with integer frequency (Hz) and a phase offset for
/// the first rising edge. Edge times are exact rational values rounded down
/// to a picosecond, so two domains with a rational frequency ratio never
/// drift. The frequency may be re-programmed at runtime; the new regime is
/// anchored at the next edge boundary so edge times stay strictly
/// increasing.
class ClockDomain {
 public:
  ClockDomain(std::string name, std::uint64_t frequency_hz, SimTime phase_ps)
      : name_(std::move(name)),
        frequency_hz_(frequency_hz),
        anchor_ps_(phase_ps) {
    if (frequency_hz == 0)
      throw std::invalid_argument("clock frequency must be > 0");
  }

  const std::string& name() const { return name_; }
  std::uint64_t frequency_hz() const { return frequency_hz_; }

  /// Nominal period, rounded up to a whole picosecond. Used for
  /// synchronizer-delay arithmetic (conservative rounding).
  SimTime period_ps() const {
    return (kPsPerSecond + frequency_hz_ - 1) / frequency_hz_;
  }

  /// Time of rising edge k in the current frequency regime.
  SimTime edge_time(std::uint64_t k) const {
    using u128 = unsigned __int128;
    return anchor_ps_ +
           static_cast<SimTime>((u128)k * kPsPerSecond / frequency_hz_);
  }

  /// Index (within the current regime) of the first rising edge at time >= t.
  std::uint64_t edge_at_or_after(SimTime t) const {
    if (t <= anchor_ps_) return 0;
    using u128 = unsigned __int128;
    u128 dt = t - anchor_ps_;
    std::uint64_t k = static_cast<std::uint64_t>(
        (dt * frequency_hz_ + kPsPerSecond - 1) / kPsPerSecond);
    while (edge_time(k) < t) ++k;
    while (k > 0 && edge_time(k - 1) >= t) --k;
    return k;
  }

  SimTime next_edge_at_or_after(SimTime t) const {
    return edge_time(edge_at_or_after(t));
  }

  /// Re-programs the frequency. The new regime starts at the first old-regime
  /// edge at or after `at`, so the change takes effect at a clean boundary.
  void set_frequency(std::uint64_t frequency_hz, SimTime at) {
    if (frequency_hz == 0)
      throw std::invalid_argument("clock frequency must be > 0");
    anchor_ps_ = next_edge_at_or_after(at);
    frequency_hz_ = frequency_hz;
  }

 private:
  std::string name_;
  std::uint64_t frequency_hz_;
  SimTime anchor_ps_;
};

}  // namespace duet::sim
