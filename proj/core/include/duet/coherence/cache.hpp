#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "duet/coherence/fabric.hpp"
#include "duet/coherence/types.hpp"

namespace duet::coherence {

/// Private write-back L2 cache with MESI states, LRU replacement and a
/// configurable number of outstanding misses (MSHRs). The same controller
/// serves processor tiles (one blocking agent) and the adapter's Proxy
/// Cache (multiple in-flight requests plus per-line virtual-page tags for
/// soft-cache reverse mapping).
class CacheController {
 public:
  enum class AccessOp { Load, Store, Cas, FetchAdd };

  struct Access {
    AccessOp op = AccessOp::Load;
    std::uint64_t addr = 0;
    std::uint32_t size = 8;
    std::uint64_t value = 0;     // store value / fetch_add delta / cas desired
    std::uint64_t expected = 0;  // cas comparand
    duet::sim::PhaseLogPtr trace;
  };

  struct Result {
    std::uint64_t value = 0;  // loaded value; old value for atomics
    bool cas_ok = false;
    std::vector<std::uint8_t> bytes;  // full access payload (loads)
  };

  using Callback = std::function<void(const Result&)>;

  /// Coherence events the adapter listens to (invalidation forwarding).
  struct Listener {
    virtual ~Listener() = default;
    virtual void on_line_invalidated(std::uint64_t line, bool vpn_valid,
                                     std::uint64_t vpn) = 0;
    virtual void on_line_downgraded(std::uint64_t line) = 0;
  };

  CacheController(Fabric& fabric, const duet::sim::ClockDomain& domain,
                  duet::noc::TileId tile, int cache_id, bool slow_domain);

  /// Issues one access; `done` fires when it commits. Throws on misaligned
  /// or oversized accesses.
  void access(Access a, Callback done);

  /// Entry point for directory-originated messages and data responses.
  void handle_noc(const duet::noc::NocMessage& msg);

  /// Replaces the NoC send path (the FPSoC wrapper interposes CDC here).
  void set_send_hook(std::function<void(duet::noc::NocMessage)> hook) {
    send_hook_ = std::move(hook);
  }
  void set_listener(Listener* l) { listener_ = l; }
  void set_mshr_limit(unsigned n) { mshr_limit_ = n; }

  bool set_vpn(std::uint64_t line, std::uint64_t vpn);
  void clear_vpn(std::uint64_t line);
  std::optional<std::uint64_t> line_vpn(std::uint64_t line) const;
  Mesi line_state(std::uint64_t line) const;

  int cache_id() const { return cache_id_; }
  duet::noc::TileId tile() const { return tile_; }
  std::size_t resident_lines() const;

  /// Quiescence audit: reports every resident line to the scoreboard.
  void audit() const;

  std::uint64_t hits = 0;
  std::uint64_t misses = 0;

 private:
  struct Line {
    std::uint64_t addr = 0;
    Mesi state = Mesi::I;
    bool dirty = false;
    std::uint64_t lru = 0;
    bool vpn_valid = false;
    std::uint64_t vpn = 0;
    std::vector<std::uint8_t> data;
  };
  struct MshrEntry {
    bool want_exclusive = false;
    std::deque<std::pair<Access, Callback>> waiting;
  };
  struct EvictBuffer {
    std::vector<std::uint8_t> data;
    bool dirty = false;
  };

  void process(const Access& a, const Callback& done);
  bool try_serve_resident(const Access& a, const Callback& done, Line& line);
  void start_miss(const Access& a, const Callback& done);
  void complete_fill(std::uint64_t line_addr, Mesi granted,
                     const std::vector<std::uint8_t>& data,
                     const duet::sim::PhaseLogPtr& trace);
  Line* find_line(std::uint64_t line_addr);
  const Line* find_line(std::uint64_t line_addr) const;
  Line& install_line(std::uint64_t line_addr, Mesi state,
                     std::vector<std::uint8_t> data);
  void evict_victim(std::size_t set_idx);
  std::size_t set_of(std::uint64_t line_addr) const;
  void invalidate_line(Line& line, bool notify);
  void send(duet::noc::NocMessage msg);
  void set_state(Line& line, Mesi to);
  duet::sim::Phase my_phase() const {
    return slow_domain_ ? duet::sim::Phase::SlowCache
                        : duet::sim::Phase::FastCache;
  }

  Fabric& fabric_;
  const duet::sim::ClockDomain& domain_;
  duet::noc::TileId tile_;
  int cache_id_;
  bool slow_domain_;
  std::uint32_t line_bytes_;
  std::size_t n_sets_;
  std::uint32_t assoc_;
  std::uint64_t lru_tick_ = 0;
  unsigned mshr_limit_ = 1;

  std::vector<std::vector<Line>> sets_;
  std::map<std::uint64_t, MshrEntry> mshr_;
  std::deque<std::pair<Access, Callback>> stalled_;
  std::map<std::uint64_t, EvictBuffer> evicting_;

  std::function<void(duet::noc::NocMessage)> send_hook_;
  Listener* listener_ = nullptr;
};

}  // namespace duet::coherence
