#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <vector>

#include "duet/coherence/fabric.hpp"

namespace duet::coherence {

/// One shard of the distributed directory plus its slice of the shared L3
/// data image. The directory blocks per line: while a transaction is in
/// flight, further requests for that line are deferred and replayed in
/// arrival order. Message service is pipelined with a fixed latency and a
/// minimum occupancy between message starts.
class DirectoryShard {
 public:
  DirectoryShard(Fabric& fabric, duet::noc::TileId tile);

  void handle_noc(const duet::noc::NocMessage& msg);

  /// Quiescence audit of every tracked line.
  void audit() const;

  std::uint64_t messages_handled = 0;
  /// Secondary write-back transactions (owner downgrades/surrenders) issued.
  std::uint64_t secondary_writebacks = 0;

 private:
  enum class State { I, S, EM };
  struct Entry {
    State state = State::I;
    std::set<int> sharers;  // mesh tile indices
    int owner = -1;
    bool busy = false;
    std::deque<duet::noc::NocMessage> deferred;
    // in-flight transaction context
    duet::noc::TileId requester;
    int req_op = 0;
    unsigned pending_acks = 0;
    bool requester_was_sharer = false;
    duet::sim::PhaseLogPtr trace;
    std::vector<std::uint8_t> image;
    bool image_valid = false;
  };

  void service(const duet::noc::NocMessage& msg);
  void process(const duet::noc::NocMessage& msg);
  void fetch_image(std::uint64_t line, const duet::noc::NocMessage& original);
  void grant(Entry& e, std::uint64_t line, duet::noc::TileId to, int data_op,
             const duet::sim::PhaseLogPtr& trace);
  void unblock(std::uint64_t line);
  void send(duet::noc::NocMessage msg);
  int tile_index(duet::noc::TileId t) const;
  duet::noc::TileId tile_id(int idx) const;

  Fabric& fabric_;
  duet::noc::TileId tile_;
  std::map<std::uint64_t, Entry> entries_;
  std::map<std::uint64_t, duet::noc::NocMessage> awaiting_memory_;
  duet::sim::SimTime next_free_ = 0;
};

/// Fixed-latency memory endpoint holding the backing byte image.
class MemoryController {
 public:
  MemoryController(Fabric& fabric, duet::noc::TileId tile)
      : fabric_(fabric), tile_(tile) {}

  void handle_noc(const duet::noc::NocMessage& msg);

  /// Functional initialization before a run (also seeds the scoreboard's
  /// data-value model).
  void poke(std::uint64_t addr, const std::vector<std::uint8_t>& bytes);
  void poke_u64(std::uint64_t addr, std::uint32_t size, std::uint64_t value);
  std::vector<std::uint8_t> peek_line(std::uint64_t line) const;

 private:
  Fabric& fabric_;
  duet::noc::TileId tile_;
  std::map<std::uint64_t, std::uint8_t> bytes_;
};

}  // namespace duet::coherence
