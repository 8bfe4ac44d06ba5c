#pragma once

#include <vector>

#include "duet/coherence/scoreboard.hpp"
#include "duet/coherence/types.hpp"
#include "duet/noc/mesh.hpp"
#include "duet/sim/engine.hpp"

namespace duet::coherence {

/// Protocol mutations used to validate the invariant checker. Exactly one
/// may be armed per run; each must be caught by at least one invariant.
enum class FaultInjection {
  None,
  SkipInvForward,
  ReorderFifo,
  DropWriteThrough,
  StaleDirectorySharer,
  DuplicateStoreAck,
  IgnoreSynonym,
};

/// Shared wiring for the coherence protocol: address interleaving across
/// directory shards, the memory-controller endpoint and the scoreboard.
class Fabric {
 public:
  Fabric(duet::sim::Engine& engine, duet::noc::Mesh& mesh,
         const duet::sim::ClockDomain& sys, CacheConfig config,
         Scoreboard* scoreboard)
      : engine_(engine),
        mesh_(mesh),
        sys_(sys),
        config_(config),
        scoreboard_(scoreboard) {}

  void add_shard_tile(duet::noc::TileId t) { shard_tiles_.push_back(t); }
  void set_memctl_tile(duet::noc::TileId t) { memctl_tile_ = t; }

  /// Line-index-modulo-shard-count home mapping; stable across a run.
  duet::noc::TileId shard_tile(std::uint64_t addr) const {
    std::uint64_t idx = addr / config_.line_bytes;
    return shard_tiles_[idx % shard_tiles_.size()];
  }
  std::size_t shard_count() const { return shard_tiles_.size(); }
  const std::vector<duet::noc::TileId>& shard_tiles() const {
    return shard_tiles_;
  }
  duet::noc::TileId memctl_tile() const { return memctl_tile_; }

  duet::sim::Engine& engine() { return engine_; }
  duet::noc::Mesh& mesh() { return mesh_; }
  const duet::sim::ClockDomain& sys() const { return sys_; }
  const CacheConfig& config() const { return config_; }
  Scoreboard* scoreboard() { return scoreboard_; }

  FaultInjection fault = FaultInjection::None;

 private:
  duet::sim::Engine& engine_;
  duet::noc::Mesh& mesh_;
  const duet::sim::ClockDomain& sys_;
  CacheConfig config_;
  Scoreboard* scoreboard_;
  std::vector<duet::noc::TileId> shard_tiles_;
  duet::noc::TileId memctl_tile_;
};

}  // namespace duet::coherence
