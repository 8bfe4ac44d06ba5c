#include "duet/coherence/scoreboard.hpp"

#include <algorithm>

namespace duet::coherence {

void Scoreboard::check_swmr(std::uint64_t line, duet::sim::SimTime t) {
  const auto& lv = lines_[line];
  int exclusive = 0, shared = 0;
  for (const auto& [id, st] : lv.states) {
    if (st == Mesi::M || st == Mesi::E)
      ++exclusive;
    else if (st == Mesi::S)
      ++shared;
  }
  if (exclusive > 1 || (exclusive == 1 && shared > 0)) {
    std::string detail = "line 0x" + std::to_string(line) + " held:";
    for (const auto& [id, st] : lv.states)
      detail += " cache" + std::to_string(id) + "=" + to_string(st);
    flag("SWMR", detail, t);
  }
}

void Scoreboard::on_state(int cache_id, std::uint64_t line, Mesi from, Mesi to,
                          duet::sim::SimTime t) {
  (void)from;
  auto& lv = lines_[line];
  if (to == Mesi::I)
    lv.states.erase(cache_id);
  else
    lv.states[cache_id] = to;
  check_swmr(line, t);
}

void Scoreboard::on_store_commit(int cache_id, std::uint64_t addr,
                                 std::span<const std::uint8_t> bytes,
                                 duet::sim::SimTime t) {
  (void)cache_id;
  (void)t;
  for (std::size_t i = 0; i < bytes.size(); ++i) model_[addr + i] = bytes[i];
}

void Scoreboard::on_load(int cache_id, std::uint64_t addr,
                         std::span<const std::uint8_t> bytes,
                         duet::sim::SimTime t) {
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (model_byte(addr + i) != bytes[i]) {
      flag("data-value",
           "cache" + std::to_string(cache_id) + " load at 0x" +
               std::to_string(addr + i) + " saw " +
               std::to_string(int(bytes[i])) + ", expected " +
               std::to_string(int(model_byte(addr + i))),
           t);
      return;
    }
  }
}

void Scoreboard::poke_model(std::uint64_t addr,
                            std::span<const std::uint8_t> bytes) {
  for (std::size_t i = 0; i < bytes.size(); ++i) model_[addr + i] = bytes[i];
}

std::uint8_t Scoreboard::model_byte(std::uint64_t addr) const {
  auto it = model_.find(addr);
  return it == model_.end() ? 0 : it->second;
}

void Scoreboard::on_local_send(int, std::uint64_t, duet::sim::SimTime) {}

void Scoreboard::on_local_recv(int hub_id, std::uint64_t seq,
                               duet::sim::SimTime t) {
  auto& expected = local_next_seq_[hub_id];
  if (seq != expected) {
    flag("local-protocol-order",
         "hub" + std::to_string(hub_id) + " received seq " +
             std::to_string(seq) + ", expected " + std::to_string(expected),
         t);
  }
  expected = seq + 1;
}

void Scoreboard::on_soft_store_issue(int hub_id) {
  ++soft_stores_issued_[hub_id];
}

void Scoreboard::on_hub_store_arrival(int hub_id) {
  ++hub_stores_arrived_[hub_id];
}

void Scoreboard::on_soft_fill(int hub_id, std::uint64_t vline,
                              std::uint64_t pline, duet::sim::SimTime t) {
  auto& resident = soft_resident_[hub_id];
  for (const auto& [v, sl] : resident) {
    if (v != vline && sl.pline == pline) {
      flag("synonym-exclusion",
           "hub" + std::to_string(hub_id) + " holds vlines 0x" +
               std::to_string(v) + " and 0x" + std::to_string(vline) +
               " for the same physical line 0x" + std::to_string(pline),
           t);
    }
  }
  resident[vline] = SoftLine{pline};
}

void Scoreboard::on_soft_invalidate(int hub_id, std::uint64_t vline,
                                    duet::sim::SimTime) {
  soft_resident_[hub_id].erase(vline);
  required_inv_[hub_id].erase(vline);
}

void Scoreboard::on_soft_read(int hub_id, std::uint64_t vline,
                              std::uint64_t paddr,
                              std::span<const std::uint8_t> bytes,
                              bool from_write_buffer, duet::sim::SimTime t) {
  if (from_write_buffer) return;  // value covered by a pending local store
  auto& req = required_inv_[hub_id];
  auto it = req.find(vline);
  if (it != req.end() && t > it->second) {
    flag("data-value",
         "hub" + std::to_string(hub_id) + " soft cache served vline 0x" +
             std::to_string(vline) +
             " after its invalidation delivery deadline (stale data)",
         t);
    return;
  }
  if (it != req.end()) return;  // invalidation legitimately still in flight
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (model_byte(paddr + i) != bytes[i]) {
      // A mismatch with no in-flight invalidation means the soft cache holds
      // data that was never coherent.
      flag("data-value",
           "hub" + std::to_string(hub_id) + " soft cache read at 0x" +
               std::to_string(paddr + i) + " saw " +
               std::to_string(int(bytes[i])) + ", expected " +
               std::to_string(int(model_byte(paddr + i))),
           t);
      return;
    }
  }
}

void Scoreboard::on_required_soft_inv(int hub_id, std::uint64_t vline,
                                      duet::sim::SimTime deadline) {
  // Registered even when the soft line is not resident yet: the triggering
  // proxy tag implies a fill is crossing the FIFO ahead of this Inv, and the
  // eventual Inv delivery erases the entry in either case.
  auto& slot = required_inv_[hub_id][vline];
  slot = std::max(slot, deadline);
}

void Scoreboard::on_adapter_deactivated(int adapter_id, duet::sim::SimTime) {
  deactivated_adapters_.insert(adapter_id);
}

void Scoreboard::on_adapter_reactivated(int adapter_id) {
  deactivated_adapters_.erase(adapter_id);
}

void Scoreboard::on_hub_accept_request(int adapter_id, bool adapter_active,
                                       duet::sim::SimTime t) {
  if (!adapter_active || deactivated_adapters_.count(adapter_id)) {
    flag("containment",
         "adapter" + std::to_string(adapter_id) +
             " accepted an eFPGA request while deactivated",
         t);
  }
}

void Scoreboard::audit_directory_line(std::uint64_t line,
                                      const std::set<int>& sharers,
                                      int owner_or_minus1) {
  dir_view_[line] = {sharers, owner_or_minus1};
}

void Scoreboard::audit_cache_data(int cache_id, std::uint64_t line, Mesi state,
                                  std::span<const std::uint8_t> bytes) {
  if (state != Mesi::M && state != Mesi::E) return;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (model_byte(line + i) != bytes[i]) {
      flag("write-back-completeness",
           "cache" + std::to_string(cache_id) + " owner data at 0x" +
               std::to_string(line + i) + " diverges from the store model",
           0);
      return;
    }
  }
}

void Scoreboard::audit_image_data(std::uint64_t line,
                                  std::span<const std::uint8_t> bytes) {
  // Only meaningful when no cache holds the line exclusively.
  auto it = lines_.find(line);
  if (it != lines_.end()) {
    for (const auto& [id, st] : it->second.states)
      if (st == Mesi::M || st == Mesi::E) return;
  }
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (model_byte(line + i) != bytes[i]) {
      flag("write-back-completeness",
           "L3 image at 0x" + std::to_string(line + i) +
               " diverges from the store model (lost write-back)",
           0);
      return;
    }
  }
}

void Scoreboard::finish_audit(duet::sim::SimTime t) {
  // Directory/cache agreement.
  for (const auto& [line, view] : dir_view_) {
    const auto& [sharers, owner] = view;
    std::set<int> actual;
    auto it = lines_.find(line);
    if (it != lines_.end())
      for (const auto& [id, st] : it->second.states) actual.insert(id);
    std::set<int> expected = sharers;
    if (owner >= 0) expected.insert(owner);
    if (actual != expected) {
      flag("directory-agreement",
           "line 0x" + std::to_string(line) + ": directory set size " +
               std::to_string(expected.size()) + " != cache-held set size " +
               std::to_string(actual.size()),
           t);
    }
  }
  // Write-through completeness per hub.
  for (const auto& [hub, issued] : soft_stores_issued_) {
    std::uint64_t arrived = hub_stores_arrived_[hub];
    if (arrived != issued) {
      flag("write-through-completeness",
           "hub" + std::to_string(hub) + " issued " + std::to_string(issued) +
               " soft stores but " + std::to_string(arrived) +
               " reached the proxy",
           t);
    }
  }
  // Mandatory invalidations past their deadline with the line still resident.
  for (const auto& [hub, m] : required_inv_) {
    for (const auto& [vline, deadline] : m) {
      if (t > deadline && soft_resident_[hub].count(vline)) {
        flag("data-value",
             "hub" + std::to_string(hub) + " soft cache still holds vline 0x" +
                 std::to_string(vline) + " past its invalidation deadline",
             t);
      }
    }
  }
}

}  // namespace duet::coherence
