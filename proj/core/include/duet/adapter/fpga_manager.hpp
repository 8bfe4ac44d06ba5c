#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "duet/adapter/memory_hub.hpp"

namespace duet::adapter {

inline std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

/// A bitstream is modeled as the name of an accelerator behavior plus
/// opaque configuration bytes; the checksum covers the bytes.
struct Bitstream {
  std::string accelerator;
  std::vector<std::uint8_t> bytes;
  std::uint64_t checksum = 0;
  std::uint64_t fpga_freq_hz = 0;

  static Bitstream make(std::string accelerator,
                        std::vector<std::uint8_t> bytes,
                        std::uint64_t freq_hz) {
    Bitstream b{std::move(accelerator), std::move(bytes), 0, freq_hz};
    b.checksum = fnv1a(b.bytes.data(), b.bytes.size());
    return b;
  }
};

/// Programming engine for the eFPGA: verifies bitstream integrity, swaps
/// the accelerator behavior after a programming delay and reprograms the
/// FPGA clock at a clean domain boundary. Loads are refused while the
/// adapter is active ("deactivated during reconfiguration").
class FpgaManager {
 public:
  enum class Status { Ok, RejectedActive, RejectedChecksum };

  FpgaManager(duet::sim::Engine& engine, const duet::sim::ClockDomain& sys,
              duet::sim::ClockDomain& fpga, std::shared_ptr<AdapterState> state,
              std::uint64_t programming_delay_cycles = 1000)
      : engine_(engine),
        sys_(sys),
        fpga_(fpga),
        state_(std::move(state)),
        delay_cycles_(programming_delay_cycles) {}

  Status load_bitstream(const Bitstream& b, std::function<void()> programmed) {
    if (state_->active()) return Status::RejectedActive;
    if (b.checksum != fnv1a(b.bytes.data(), b.bytes.size()))
      return Status::RejectedChecksum;
    engine_.schedule_in_cycles(
        sys_, delay_cycles_,
        [this, name = b.accelerator, freq = b.fpga_freq_hz,
         programmed = std::move(programmed)] {
          current_ = name;
          if (freq) set_clock(freq);
          if (programmed) programmed();
        });
    return Status::Ok;
  }

  void set_clock(std::uint64_t freq_hz) {
    fpga_.set_frequency(freq_hz, engine_.now());
  }

  const std::string& current() const { return current_; }

 private:
  duet::sim::Engine& engine_;
  const duet::sim::ClockDomain& sys_;
  duet::sim::ClockDomain& fpga_;
  std::shared_ptr<AdapterState> state_;
  std::uint64_t delay_cycles_;
  std::string current_;
};

}  // namespace duet::adapter
