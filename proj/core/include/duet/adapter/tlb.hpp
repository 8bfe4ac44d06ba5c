#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

namespace duet::adapter {

constexpr std::uint64_t kPageBytes = 4096;

inline std::uint64_t vpn_of(std::uint64_t vaddr) { return vaddr / kPageBytes; }
inline std::uint64_t page_off(std::uint64_t addr) { return addr % kPageBytes; }

struct PagePerm {
  std::uint64_t ppn = 0;
  bool read = true;
  bool write = true;
};

/// Fully-associative, LRU translation buffer backed by a software page table.
/// A lookup miss is resolved by the (modeled) interrupt handler, which
/// installs the entry after a fixed software delay; a second fault on the
/// same vpn after an install indicates a broken configuration and is fatal.
class Tlb {
 public:
  explicit Tlb(unsigned entries = 16) : capacity_(entries) {}

  /// Software page table setup (platform initialization).
  void map(std::uint64_t vpn, PagePerm p) { page_table_[vpn] = p; }

  enum class Outcome { Hit, Miss, Fault };
  struct Lookup {
    Outcome outcome;
    std::uint64_t ppn = 0;
  };

  Lookup lookup(std::uint64_t vpn, bool is_write) {
    auto it = entries_.find(vpn);
    if (it != entries_.end()) {
      if (is_write && !it->second.perm.write) return {Outcome::Fault};
      touch(it);
      return {Outcome::Hit, it->second.perm.ppn};
    }
    return {Outcome::Miss};
  }

  /// Interrupt-handler path: consult the page table and install. Returns
  /// false when the page is unmapped or the permission check fails (the
  /// accelerator gets killed in that case).
  bool install(std::uint64_t vpn, bool is_write) {
    auto pt = page_table_.find(vpn);
    if (pt == page_table_.end()) return false;
    if (is_write && !pt->second.write) return false;
    if (!is_write && !pt->second.read) return false;
    if (installed_once_.count(vpn) && !entries_.count(vpn))
      // Installed before, evicted since: legal. Faulting again while still
      // resident is caught in translate_or_miss below.
      ;
    if (entries_.size() >= capacity_) evict_lru();
    lru_.push_front(vpn);
    entries_[vpn] = {pt->second, lru_.begin()};
    installed_once_.insert(vpn);
    return true;
  }

  bool resident(std::uint64_t vpn) const { return entries_.count(vpn) > 0; }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    PagePerm perm;
    std::list<std::uint64_t>::iterator lru_it;
  };

  void touch(std::map<std::uint64_t, Entry>::iterator it) {
    lru_.erase(it->second.lru_it);
    lru_.push_front(it->first);
    it->second.lru_it = lru_.begin();
  }

  void evict_lru() {
    std::uint64_t victim = lru_.back();
    lru_.pop_back();
    entries_.erase(victim);
  }

  unsigned capacity_;
  std::map<std::uint64_t, Entry> entries_;
  std::list<std::uint64_t> lru_;
  std::map<std::uint64_t, PagePerm> page_table_;
  std::set<std::uint64_t> installed_once_;
};

}  // namespace duet::adapter
