#pragma once

#include <cstdint>
#include <vector>

#include "duet/noc/message.hpp"

namespace duet::coherence {

struct CacheConfig {
  std::uint32_t line_bytes = 16;
  std::uint32_t l2_bytes = 8192;
  std::uint32_t l3_shard_bytes = 65536;
  std::uint32_t associativity = 4;
  std::uint32_t max_store_bytes = 8;
  std::uint64_t l2_hit_latency = 2;        // sys cycles
  std::uint64_t directory_latency = 2;     // sys cycles per message
  std::uint64_t directory_occupancy = 2;   // min cycles between messages
  std::uint64_t memory_latency = 30;       // sys cycles
};

enum class Mesi : std::uint8_t { I, S, E, M };

inline const char* to_string(Mesi m) {
  switch (m) {
    case Mesi::I: return "I";
    case Mesi::S: return "S";
    case Mesi::E: return "E";
    case Mesi::M: return "M";
  }
  return "?";
}

/// Coherence opcodes carried in NocMessage::op.
enum CohOp : int {
  kGetS = 1,      // read miss, req channel
  kGetM,          // write miss / upgrade, req channel
  kPutM,          // dirty eviction with data, req channel
  kPutClean,      // clean eviction notice (S or E), req channel
  kFwdGetS,       // directory asks owner to downgrade, inv channel
  kFwdGetM,       // directory asks owner to invalidate + surrender, inv channel
  kInvReq,        // directory invalidates a sharer, inv channel
  kDataS,         // grant S with data, resp channel
  kDataE,         // grant E with data, resp channel
  kDataM,         // grant M with data, resp channel
  kOwnerData,     // owner -> directory data surrender, resp channel
  kInvAck,        // sharer -> directory, resp channel
  kPutAck,        // directory -> evicting cache, resp channel
  kMemRead,       // directory -> memory controller, req channel
  kMemData,       // memory controller -> directory, resp channel
  kMmioRead = 64, // processor -> control hub, req channel
  kMmioWrite,
  kMmioResp,
};

inline std::uint64_t line_of(std::uint64_t addr, std::uint32_t line_bytes) {
  return addr / line_bytes * line_bytes;
}

}  // namespace duet::coherence
