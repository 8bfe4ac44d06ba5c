#include "duet/adapter/soft_cache.hpp"

#include <stdexcept>

namespace duet::adapter {

using coherence::FaultInjection;
using duet::sim::Future;
using duet::sim::SimTime;

SoftCache::SoftCache(duet::sim::Engine& engine,
                     const duet::sim::ClockDomain& fpga, LocalPort& hub,
                     Params params)
    : engine_(engine),
      fpga_(fpga),
      hub_(hub),
      params_(params),
      line_bytes_(16) {
  lines_.resize(params_.lines);
  for (auto& l : lines_) l.data.resize(line_bytes_);
  hub_.set_efpga_sink([this](const LocalMsg& m) { handle_hub(m); });
}

std::uint64_t SoftCache::read_line_le(const Line& l, std::uint64_t vaddr,
                                      std::uint32_t size) const {
  std::uint64_t off = vaddr - l.vline;
  std::uint64_t v = 0;
  for (std::uint32_t i = 0; i < size; ++i)
    v |= std::uint64_t(l.data[off + i]) << (8 * i);
  return v;
}

void SoftCache::write_line_le(Line& l, std::uint64_t vaddr, std::uint32_t size,
                              std::uint64_t value) {
  std::uint64_t off = vaddr - l.vline;
  for (std::uint32_t i = 0; i < size; ++i)
    l.data[off + i] = std::uint8_t(value >> (8 * i));
}

bool SoftCache::wb_overlap(std::uint64_t vaddr, std::uint32_t size,
                           std::uint64_t* exact_value, bool* exact) const {
  bool found = false;
  *exact = false;
  for (const auto& e : wb_) {  // oldest to youngest; youngest match wins
    if (e.vaddr < vaddr + size && vaddr < e.vaddr + e.size) {
      found = true;
      if (e.vaddr == vaddr && e.size == size) {
        *exact = true;
        *exact_value = e.value;
      } else {
        *exact = false;
      }
    }
  }
  return found;
}

Future<std::uint64_t> SoftCache::read(std::uint64_t vaddr, std::uint32_t size,
                                      duet::sim::PhaseLogPtr trace) {
  if (size == 0 || size > 8 || vaddr % size)
    throw std::invalid_argument("bad soft-cache read");
  auto fut = duet::sim::make_future<std::uint64_t>();
  std::uint64_t vline = vaddr / line_bytes_ * line_bytes_;
  SimTime start = engine_.now();
  coherence::Scoreboard* sb = hub_.state().scoreboard();

  std::uint64_t fwd = 0;
  bool exact = false;
  bool overlap = wb_overlap(vaddr, size, &fwd, &exact);
  Line& l = line_slot(vline);
  bool resident = l.valid && l.vline == vline;

  auto serve_hit = [&](std::uint64_t v, bool from_wb, std::uint64_t paddr) {
    ++hits;
    if (sb) {
      std::vector<std::uint8_t> bytes(size);
      for (std::uint32_t i = 0; i < size; ++i)
        bytes[i] = std::uint8_t(v >> (8 * i));
      sb->on_soft_read(hub_.hub_id(), vline, paddr, bytes, from_wb, start);
    }
    engine_.schedule_in_cycles(fpga_, params_.hit_latency_cycles,
                               [fut, v, trace, start, this] {
                                 if (trace)
                                   trace->add(duet::sim::Phase::SlowCache,
                                              start, engine_.now());
                                 fut->complete(v);
                               });
  };

  if (resident) {
    // Buffered writes were applied to the line at insert, so the line is
    // current; an overlap only changes the audit classification.
    serve_hit(read_line_le(l, vaddr, size), overlap, l.paddr + (vaddr - vline));
    return fut;
  }
  if (overlap && exact && params_.raw_forwarding) {
    serve_hit(fwd, true, 0);
    return fut;
  }

  ++misses;
  bool first = pending_miss_[vline].empty();
  pending_miss_[vline].push_back({vaddr, size, fut, trace});
  if (first) {
    miss_queue_.push_back(vline);
    pump();
  }
  return fut;
}

Future<bool> SoftCache::write(std::uint64_t vaddr, std::uint32_t size,
                              std::uint64_t value,
                              duet::sim::PhaseLogPtr trace) {
  if (size == 0 || size > 8 || vaddr % size)
    throw std::invalid_argument("bad soft-cache write");
  auto fut = duet::sim::make_future<bool>();
  WbEntry e{vaddr, size, value, std::move(trace), false};
  if (wb_.size() >= params_.write_buffer) {
    pending_writes_.push_back({std::move(e), fut});
  } else {
    accept_write(std::move(e));
    fut->complete(true);
  }
  return fut;
}

void SoftCache::accept_write(WbEntry e) {
  std::uint64_t vline = e.vaddr / line_bytes_ * line_bytes_;
  Line& l = line_slot(vline);
  if (l.valid && l.vline == vline)
    write_line_le(l, e.vaddr, e.size, e.value);
  wb_.push_back(std::move(e));
  if (hub_.state().scoreboard())
    hub_.state().scoreboard()->on_soft_store_issue(hub_.hub_id());
  pump();
}

void SoftCache::admit_pending_writes() {
  while (!pending_writes_.empty() && wb_.size() < params_.write_buffer) {
    auto [e, fut] = std::move(pending_writes_.front());
    pending_writes_.pop_front();
    accept_write(std::move(e));
    fut->complete(true);
  }
}

void SoftCache::pump() {
  // At most one local-protocol message leaves per FPGA edge; buffered
  // stores drain ahead of miss Loads so write-through order is preserved.
  if (pump_armed_) return;
  pump_armed_ = true;
  engine_.schedule_in_cycles(fpga_, 1, [this] {
    pump_armed_ = false;
    bool sent = false;
    for (auto& e : wb_) {
      if (e.sent) continue;
      if (hub_.fabric().fault == FaultInjection::DropWriteThrough &&
          !drop_fault_used_) {
        // Mutation: the store silently never reaches the hub.
        drop_fault_used_ = true;
        e.sent = true;
        ++unacked_stores_;
        sent = true;
        break;
      }
      LocalMsg m;
      m.kind = LocalKind::Store;
      m.addr = e.vaddr;
      m.size = e.size;
      m.value = e.value;
      m.trace = e.trace;
      if (hub_.request(std::move(m))) {
        e.sent = true;
        ++unacked_stores_;
        sent = true;
      }
      break;  // one per edge, and stop at the oldest on backpressure
    }
    if (!sent && !miss_queue_.empty()) {
      bool stores_pending = false;
      for (auto& e : wb_)
        if (!e.sent) stores_pending = true;
      if (!stores_pending) {
        LocalMsg m;
        m.kind = LocalKind::Load;
        m.addr = miss_queue_.front();
        m.size = line_bytes_;
        auto it = pending_miss_.find(m.addr);
        if (it != pending_miss_.end() && !it->second.empty())
          m.trace = it->second.front().trace;
        if (hub_.request(std::move(m))) miss_queue_.pop_front();
      }
    }
    bool work_left = !miss_queue_.empty();
    for (auto& e : wb_)
      if (!e.sent) work_left = true;
    if (work_left) pump();
  });
}

void SoftCache::handle_hub(const LocalMsg& m) {
  coherence::Scoreboard* sb = hub_.state().scoreboard();
  if (sb) sb->on_local_recv(hub_.hub_id(), m.seq, engine_.now());
  switch (m.kind) {
    case LocalKind::LoadAck:
      apply_fill(m);
      break;
    case LocalKind::StoreAck: {
      if (unacked_stores_) --unacked_stores_;
      // Acks arrive in send order: retire the oldest in-flight entry.
      for (auto it = wb_.begin(); it != wb_.end(); ++it) {
        if (it->sent) {
          wb_.erase(it);
          break;
        }
      }
      admit_pending_writes();
      break;
    }
    case LocalKind::Inv: {
      std::uint64_t vline = m.addr / line_bytes_ * line_bytes_;
      Line& l = line_slot(vline);
      if (l.valid && l.vline == vline) l.valid = false;
      if (sb) sb->on_soft_invalidate(hub_.hub_id(), vline, engine_.now());
      break;
    }
    default:
      throw std::logic_error("unexpected local message at soft cache");
  }
}

void SoftCache::apply_fill(const LocalMsg& m) {
  coherence::Scoreboard* sb = hub_.state().scoreboard();
  std::uint64_t vline = m.addr / line_bytes_ * line_bytes_;
  Line& l = line_slot(vline);
  if (l.valid && l.vline != vline && sb)
    sb->on_soft_invalidate(hub_.hub_id(), l.vline, engine_.now());
  l.valid = true;
  l.vline = vline;
  l.paddr = m.paddr / line_bytes_ * line_bytes_;
  l.data = m.data;
  l.data.resize(line_bytes_);
  // Re-apply still-buffered writes so the line reflects local program order.
  for (const auto& e : wb_) {
    std::uint64_t evl = e.vaddr / line_bytes_ * line_bytes_;
    if (evl == vline) write_line_le(l, e.vaddr, e.size, e.value);
  }
  if (sb)
    sb->on_soft_fill(hub_.hub_id(), vline, l.paddr, engine_.now());

  auto node = pending_miss_.extract(vline);
  if (node.empty()) return;
  for (auto& w : node.mapped()) {
    std::uint64_t v = read_line_le(l, w.vaddr, w.size);
    if (w.trace)
      w.trace->add(duet::sim::Phase::SlowCache, engine_.now(), engine_.now());
    w.fut->complete(v);
  }
}

void SoftCache::flush_clean() {
  coherence::Scoreboard* sb = hub_.state().scoreboard();
  for (auto& l : lines_) {
    if (l.valid && sb)
      sb->on_soft_invalidate(hub_.hub_id(), l.vline, engine_.now());
    l.valid = false;
  }
}

}  // namespace duet::adapter
