#include "duet/coherence/cache.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace duet::coherence {

using duet::noc::MsgClass;
using duet::noc::NocMessage;
using duet::sim::SimTime;

namespace {

std::uint64_t read_le(const std::uint8_t* p, std::uint32_t size) {
  std::uint64_t v = 0;
  for (std::uint32_t i = 0; i < size; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

void write_le(std::uint8_t* p, std::uint32_t size, std::uint64_t v) {
  for (std::uint32_t i = 0; i < size; ++i) p[i] = std::uint8_t(v >> (8 * i));
}

}  // namespace

CacheController::CacheController(Fabric& fabric,
                                 const duet::sim::ClockDomain& domain,
                                 duet::noc::TileId tile, int cache_id,
                                 bool slow_domain)
    : fabric_(fabric),
      domain_(domain),
      tile_(tile),
      cache_id_(cache_id),
      slow_domain_(slow_domain),
      line_bytes_(fabric.config().line_bytes),
      assoc_(fabric.config().associativity) {
  std::size_t lines = fabric.config().l2_bytes / line_bytes_;
  n_sets_ = std::max<std::size_t>(1, lines / assoc_);
  sets_.resize(n_sets_);
}

std::size_t CacheController::set_of(std::uint64_t line_addr) const {
  return (line_addr / line_bytes_) % n_sets_;
}

CacheController::Line* CacheController::find_line(std::uint64_t line_addr) {
  for (auto& l : sets_[set_of(line_addr)])
    if (l.state != Mesi::I && l.addr == line_addr) return &l;
  return nullptr;
}

const CacheController::Line* CacheController::find_line(
    std::uint64_t line_addr) const {
  for (const auto& l : sets_[set_of(line_addr)])
    if (l.state != Mesi::I && l.addr == line_addr) return &l;
  return nullptr;
}

void CacheController::set_state(Line& line, Mesi to) {
  Mesi from = line.state;
  line.state = to;
  if (to == Mesi::I) {
    line.vpn_valid = false;
    line.dirty = false;
  }
  if (from != to && fabric_.scoreboard())
    fabric_.scoreboard()->on_state(cache_id_, line.addr, from, to,
                                   fabric_.engine().now());
}

void CacheController::send(NocMessage msg) {
  if (send_hook_)
    send_hook_(std::move(msg));
  else
    fabric_.mesh().send(std::move(msg));
}

void CacheController::access(Access a, Callback done) {
  if (a.size == 0 || a.size > line_bytes_ || (a.addr % a.size) != 0)
    throw std::invalid_argument("misaligned or oversized cache access");
  if (a.op != AccessOp::Load && a.size > fabric_.config().max_store_bytes)
    throw std::invalid_argument("store larger than max_store_bytes");
  SimTime start = fabric_.engine().now();
  fabric_.engine().schedule_in_cycles(
      domain_, fabric_.config().l2_hit_latency,
      [this, a = std::move(a), done = std::move(done), start]() {
        if (a.trace)
          a.trace->add(my_phase(), start, fabric_.engine().now());
        process(a, done);
      });
}

bool CacheController::try_serve_resident(const Access& a, const Callback& done,
                                         Line& line) {
  bool need_excl = a.op != AccessOp::Load;
  if (need_excl && line.state != Mesi::M && line.state != Mesi::E) return false;
  line.lru = ++lru_tick_;
  std::uint32_t off = a.addr - line.addr;
  Result r;
  Scoreboard* sb = fabric_.scoreboard();
  SimTime now = fabric_.engine().now();
  switch (a.op) {
    case AccessOp::Load: {
      r.bytes.assign(line.data.begin() + off, line.data.begin() + off + a.size);
      r.value = a.size <= 8 ? read_le(r.bytes.data(), a.size) : 0;
      if (sb) sb->on_load(cache_id_, a.addr, r.bytes, now);
      break;
    }
    case AccessOp::Store: {
      if (line.state == Mesi::E) set_state(line, Mesi::M);
      write_le(line.data.data() + off, a.size, a.value);
      line.dirty = true;
      if (sb)
        sb->on_store_commit(
            cache_id_, a.addr,
            std::span<const std::uint8_t>(line.data.data() + off, a.size),
            now);
      break;
    }
    case AccessOp::Cas: {
      std::uint64_t old = read_le(line.data.data() + off, a.size);
      r.value = old;
      if (sb)
        sb->on_load(cache_id_, a.addr,
                    std::span<const std::uint8_t>(line.data.data() + off,
                                                  a.size),
                    now);
      if (old == a.expected) {
        if (line.state == Mesi::E) set_state(line, Mesi::M);
        write_le(line.data.data() + off, a.size, a.value);
        line.dirty = true;
        r.cas_ok = true;
        if (sb)
          sb->on_store_commit(
              cache_id_, a.addr,
              std::span<const std::uint8_t>(line.data.data() + off, a.size),
              now);
      }
      break;
    }
    case AccessOp::FetchAdd: {
      std::uint64_t old = read_le(line.data.data() + off, a.size);
      r.value = old;
      if (sb)
        sb->on_load(cache_id_, a.addr,
                    std::span<const std::uint8_t>(line.data.data() + off,
                                                  a.size),
                    now);
      if (line.state == Mesi::E) set_state(line, Mesi::M);
      write_le(line.data.data() + off, a.size, old + a.value);
      line.dirty = true;
      if (sb)
        sb->on_store_commit(
            cache_id_, a.addr,
            std::span<const std::uint8_t>(line.data.data() + off, a.size),
            now);
      break;
    }
  }
  done(r);
  return true;
}

void CacheController::process(const Access& a, const Callback& done) {
  std::uint64_t la = line_of(a.addr, line_bytes_);
  if (Line* line = find_line(la)) {
    if (try_serve_resident(a, done, *line)) {
      ++hits;
      return;
    }
  }
  ++misses;
  start_miss(a, done);
}

void CacheController::start_miss(const Access& a, const Callback& done) {
  std::uint64_t la = line_of(a.addr, line_bytes_);
  auto it = mshr_.find(la);
  if (it != mshr_.end()) {
    it->second.waiting.emplace_back(a, done);
    return;
  }
  if (mshr_.size() >= mshr_limit_) {
    stalled_.emplace_back(a, done);
    return;
  }
  MshrEntry entry;
  entry.want_exclusive = a.op != AccessOp::Load;
  entry.waiting.emplace_back(a, done);
  mshr_.emplace(la, std::move(entry));

  NocMessage req;
  req.src = tile_;
  req.dst = fabric_.shard_tile(la);
  req.msg_class = MsgClass::CoherenceReq;
  req.op = (a.op == AccessOp::Load) ? kGetS : kGetM;
  req.address = la;
  req.origin = tile_;
  req.trace = a.trace;
  send(std::move(req));
}

void CacheController::evict_victim(std::size_t set_idx) {
  auto& ways = sets_[set_idx];
  Line* victim = nullptr;
  for (auto& l : ways) {
    if (l.state == Mesi::I) continue;
    if (mshr_.count(l.addr)) continue;  // line has a transaction in flight
    if (!victim || l.lru < victim->lru) victim = &l;
  }
  if (!victim) throw std::logic_error("no evictable way in set");

  NocMessage msg;
  msg.src = tile_;
  msg.dst = fabric_.shard_tile(victim->addr);
  msg.msg_class = MsgClass::CoherenceReq;
  msg.address = victim->addr;
  msg.origin = tile_;
  if (victim->state == Mesi::M && victim->dirty) {
    msg.op = kPutM;
    msg.payload = victim->data;
    evicting_[victim->addr] = EvictBuffer{victim->data, true};
  } else {
    msg.op = kPutClean;
  }
  if (listener_ && victim->vpn_valid)
    listener_->on_line_invalidated(victim->addr, true, victim->vpn);
  set_state(*victim, Mesi::I);
  send(std::move(msg));
}

CacheController::Line& CacheController::install_line(
    std::uint64_t line_addr, Mesi state, std::vector<std::uint8_t> data) {
  auto& ways = sets_[set_of(line_addr)];
  if (Line* existing = find_line(line_addr)) {
    // Upgrade fill for an already-resident line (e.g. S -> M).
    existing->data = std::move(data);
    existing->data.resize(line_bytes_);
    existing->lru = ++lru_tick_;
    set_state(*existing, state);
    return *existing;
  }
  Line* slot = nullptr;
  for (auto& l : ways)
    if (l.state == Mesi::I) {
      slot = &l;
      break;
    }
  if (!slot && ways.size() < assoc_) {
    ways.emplace_back();
    slot = &ways.back();
  }
  if (!slot) {
    evict_victim(set_of(line_addr));
    for (auto& l : ways)
      if (l.state == Mesi::I) {
        slot = &l;
        break;
      }
  }
  slot->addr = line_addr;
  slot->dirty = false;
  slot->vpn_valid = false;
  slot->lru = ++lru_tick_;
  slot->data = std::move(data);
  slot->data.resize(line_bytes_);
  slot->state = Mesi::I;
  set_state(*slot, state);
  return *slot;
}

void CacheController::complete_fill(std::uint64_t line_addr, Mesi granted,
                                    const std::vector<std::uint8_t>& data,
                                    const duet::sim::PhaseLogPtr& trace) {
  (void)trace;
  install_line(line_addr, granted, data);
  auto node = mshr_.extract(line_addr);
  if (node.empty()) return;
  auto waiting = std::move(node.mapped().waiting);
  std::vector<std::pair<Access, Callback>> retry;
  for (auto& [a, cb] : waiting) {
    Line* line = find_line(line_addr);
    if (!line || !try_serve_resident(a, cb, *line))
      retry.emplace_back(std::move(a), std::move(cb));
  }
  // Ops needing more than what was granted (e.g. a store queued behind a
  // read miss) re-enter the pipeline.
  for (auto& [a, cb] : retry) process(a, cb);
  if (!stalled_.empty() && mshr_.size() < mshr_limit_) {
    auto [a, cb] = std::move(stalled_.front());
    stalled_.pop_front();
    process(a, cb);
  }
}

void CacheController::invalidate_line(Line& line, bool notify) {
  bool vpn_valid = line.vpn_valid;
  std::uint64_t vpn = line.vpn;
  std::uint64_t addr = line.addr;
  set_state(line, Mesi::I);
  if (notify && listener_) listener_->on_line_invalidated(addr, vpn_valid, vpn);
}

void CacheController::handle_noc(const NocMessage& msg) {
  SimTime arrival = fabric_.engine().now();
  fabric_.engine().schedule_in_cycles(
      domain_, fabric_.config().l2_hit_latency, [this, msg, arrival]() {
        if (msg.trace)
          msg.trace->add(my_phase(), arrival, fabric_.engine().now());
        NocMessage resp;
        resp.src = tile_;
        resp.dst = msg.src;
        resp.msg_class = MsgClass::CoherenceResp;
        resp.address = msg.address;
        resp.origin = msg.origin;
        resp.req_id = msg.req_id;
        resp.trace = msg.trace;
        switch (msg.op) {
          case kFwdGetS: {
            if (Line* line = find_line(msg.address)) {
              resp.op = kOwnerData;
              resp.payload = line->data;
              resp.value = line->dirty ? 1 : 0;
              set_state(*line, Mesi::S);
              line->dirty = false;
              if (listener_) listener_->on_line_downgraded(msg.address);
            } else {
              auto it = evicting_.find(msg.address);
              if (it == evicting_.end())
                throw std::logic_error(
                    "FwdGetS for line not held by presumed owner");
              resp.op = kOwnerData;
              resp.payload = it->second.data;
              // bit0: dirty, bit1: owner already evicting (do not re-add as
              // sharer)
              resp.value = (it->second.dirty ? 1 : 0) | 2;
            }
            send(std::move(resp));
            break;
          }
          case kFwdGetM: {
            if (Line* line = find_line(msg.address)) {
              resp.op = kOwnerData;
              resp.payload = line->data;
              resp.value = line->dirty ? 1 : 0;
              invalidate_line(*line, true);
            } else {
              auto it = evicting_.find(msg.address);
              if (it == evicting_.end())
                throw std::logic_error(
                    "FwdGetM for line not held by presumed owner");
              resp.op = kOwnerData;
              resp.payload = it->second.data;
              resp.value = it->second.dirty ? 1 : 0;
            }
            send(std::move(resp));
            break;
          }
          case kInvReq: {
            if (Line* line = find_line(msg.address))
              invalidate_line(*line, true);
            resp.op = kInvAck;
            send(std::move(resp));
            break;
          }
          case kDataS:
            complete_fill(msg.address, Mesi::S, msg.payload, msg.trace);
            break;
          case kDataE:
            complete_fill(msg.address, Mesi::E, msg.payload, msg.trace);
            break;
          case kDataM:
            complete_fill(msg.address, Mesi::M, msg.payload, msg.trace);
            break;
          case kPutAck:
            evicting_.erase(msg.address);
            break;
          default:
            throw std::logic_error("unexpected coherence message at cache");
        }
      });
}

bool CacheController::set_vpn(std::uint64_t line_addr, std::uint64_t vpn) {
  if (Line* line = find_line(line_addr)) {
    line->vpn = vpn;
    line->vpn_valid = true;
    return true;
  }
  return false;
}

void CacheController::clear_vpn(std::uint64_t line_addr) {
  if (Line* line = find_line(line_addr)) line->vpn_valid = false;
}

std::optional<std::uint64_t> CacheController::line_vpn(
    std::uint64_t line_addr) const {
  if (const Line* line = find_line(line_addr))
    if (line->vpn_valid) return line->vpn;
  return std::nullopt;
}

Mesi CacheController::line_state(std::uint64_t line_addr) const {
  const Line* line = find_line(line_addr);
  return line ? line->state : Mesi::I;
}

std::size_t CacheController::resident_lines() const {
  std::size_t n = 0;
  for (const auto& ways : sets_)
    for (const auto& l : ways)
      if (l.state != Mesi::I) ++n;
  return n;
}

void CacheController::audit() const {
  Scoreboard* sb = fabric_.scoreboard();
  if (!sb) return;
  for (const auto& ways : sets_)
    for (const auto& l : ways)
      if (l.state != Mesi::I)
        sb->audit_cache_data(cache_id_, l.addr, l.state, l.data);
}

}  // namespace duet::coherence
