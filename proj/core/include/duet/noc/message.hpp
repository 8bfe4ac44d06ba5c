#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "duet/sim/phase.hpp"

namespace duet::noc {

enum class TileKind { PTile, CTile, MTile, MemoryController };

struct TileId {
  int x = 0;
  int y = 0;

  bool operator==(const TileId&) const = default;
  auto operator<=>(const TileId&) const = default;
};

inline std::string to_string(TileId t) {
  return "(" + std::to_string(t.x) + "," + std::to_string(t.y) + ")";
}

enum class MsgClass : unsigned {
  CoherenceReq = 0,
  CoherenceResp = 1,
  CoherenceInv = 2,
  MmioReq = 3,
  MmioResp = 4,
};

/// Virtual channel assignment: requests, responses and invalidations travel
/// on separate channels so the directory protocol cannot deadlock. MMIO
/// traffic shares the request/response channels.
inline unsigned channel_of(MsgClass c) {
  switch (c) {
    case MsgClass::CoherenceReq:
    case MsgClass::MmioReq:
      return 0;
    case MsgClass::CoherenceResp:
    case MsgClass::MmioResp:
      return 1;
    case MsgClass::CoherenceInv:
      return 2;
  }
  return 0;
}

/// One NoC packet. The protocol layers interpret `op` (a coherence or MMIO
/// opcode), `address`, the scalar arguments and the payload; the mesh only
/// looks at src/dst/msg_class.
struct NocMessage {
  TileId src;
  TileId dst;
  MsgClass msg_class = MsgClass::CoherenceReq;
  std::uint64_t address = 0;
  std::vector<std::uint8_t> payload;
  int op = 0;
  std::uint32_t size = 0;
  std::uint64_t value = 0;
  std::uint64_t req_id = 0;
  TileId origin;  // original requester when the directory forwards
  std::uint64_t seq = 0;  // stamped by the mesh, per (src,dst,channel)
  duet::sim::PhaseLogPtr trace;  // latency attribution, probe transactions only
};

}  // namespace duet::noc
