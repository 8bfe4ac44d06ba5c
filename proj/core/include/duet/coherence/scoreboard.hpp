#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "duet/coherence/types.hpp"
#include "duet/sim/time.hpp"

namespace duet::coherence {

/// Global run auditor. Caches, directories, the adapter and soft caches
/// report every transition; the scoreboard checks the protocol invariants
/// online and accumulates violations instead of throwing, so a run can be
/// audited end to end.
///
/// Checked here: SWMR, the data-value invariant, write-back completeness,
/// local-protocol ordering, synonym exclusion, soft-cache invalidation
/// delivery, write-through completeness and containment after deactivation.
/// Directory/cache agreement is checked at quiescence via audit hooks.
class Scoreboard {
 public:
  struct Violation {
    std::string invariant;
    std::string detail;
    duet::sim::SimTime time;
  };

  explicit Scoreboard(std::uint32_t line_bytes) : line_bytes_(line_bytes) {}

  // ---- coherence-side hooks -------------------------------------------

  void on_state(int cache_id, std::uint64_t line, Mesi from, Mesi to,
                duet::sim::SimTime t);
  void on_store_commit(int cache_id, std::uint64_t addr,
                       std::span<const std::uint8_t> bytes,
                       duet::sim::SimTime t);
  void on_load(int cache_id, std::uint64_t addr,
               std::span<const std::uint8_t> bytes, duet::sim::SimTime t);

  /// Seeds the data-value model (memory image initialization before a run).
  void poke_model(std::uint64_t addr, std::span<const std::uint8_t> bytes);
  std::uint8_t model_byte(std::uint64_t addr) const;

  // ---- adapter-side hooks ---------------------------------------------

  void on_local_send(int hub_id, std::uint64_t seq, duet::sim::SimTime t);
  void on_local_recv(int hub_id, std::uint64_t seq, duet::sim::SimTime t);

  void on_soft_store_issue(int hub_id);
  void on_hub_store_arrival(int hub_id);

  void on_soft_fill(int hub_id, std::uint64_t vline, std::uint64_t pline,
                    duet::sim::SimTime t);
  void on_soft_invalidate(int hub_id, std::uint64_t vline,
                          duet::sim::SimTime t);
  void on_soft_read(int hub_id, std::uint64_t vline, std::uint64_t paddr,
                    std::span<const std::uint8_t> bytes, bool from_write_buffer,
                    duet::sim::SimTime t);

  /// Proxy invalidated a line whose soft alias must be (eventually, within
  /// `deadline`) invalidated too.
  void on_required_soft_inv(int hub_id, std::uint64_t vline,
                            duet::sim::SimTime deadline);

  void on_adapter_deactivated(int adapter_id, duet::sim::SimTime t);
  void on_adapter_reactivated(int adapter_id);
  void on_hub_accept_request(int adapter_id, bool adapter_active,
                             duet::sim::SimTime t);

  // ---- quiescence audit ------------------------------------------------

  /// Directory reports its view of one line; cache states already tracked.
  void audit_directory_line(std::uint64_t line, const std::set<int>& sharers,
                            int owner_or_minus1);
  /// Cache reports actual line content for write-back completeness.
  void audit_cache_data(int cache_id, std::uint64_t line, Mesi state,
                        std::span<const std::uint8_t> bytes);
  void audit_image_data(std::uint64_t line,
                        std::span<const std::uint8_t> bytes);
  /// Call after all audit_* reports: flags missed soft invalidations and
  /// write-through count mismatches.
  void finish_audit(duet::sim::SimTime t);

  // ---- results ---------------------------------------------------------

  bool ok() const { return violations_.empty(); }
  const std::vector<Violation>& violations() const { return violations_; }
  void clear() { violations_.clear(); }

  void flag(const std::string& invariant, const std::string& detail,
            duet::sim::SimTime t) {
    violations_.push_back({invariant, detail, t});
  }

 private:
  struct LineView {
    std::map<int, Mesi> states;  // cache id -> non-I state
  };
  struct SoftLine {
    std::uint64_t pline;
  };

  void check_swmr(std::uint64_t line, duet::sim::SimTime t);

  std::uint32_t line_bytes_;
  std::map<std::uint64_t, LineView> lines_;
  std::map<std::uint64_t, std::uint8_t> model_;  // byte-granular memory model

  std::map<int, std::uint64_t> local_next_seq_;  // hub -> expected recv seq
  std::map<int, std::uint64_t> soft_stores_issued_;
  std::map<int, std::uint64_t> hub_stores_arrived_;

  // hub -> vline -> resident soft line; and per pline set of resident vpns
  std::map<int, std::map<std::uint64_t, SoftLine>> soft_resident_;
  // hub -> vline -> delivery deadline of a mandatory invalidation
  std::map<int, std::map<std::uint64_t, duet::sim::SimTime>> required_inv_;

  std::set<int> deactivated_adapters_;

  // quiescence scratch
  std::map<std::uint64_t, std::pair<std::set<int>, int>> dir_view_;

  std::vector<Violation> violations_;
};

}  // namespace duet::coherence
