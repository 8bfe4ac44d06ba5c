#include "duet/coherence/directory.hpp"

#include <algorithm>
#include <stdexcept>

namespace duet::coherence {

using duet::noc::MsgClass;
using duet::noc::NocMessage;
using duet::noc::TileId;
using duet::sim::SimTime;

DirectoryShard::DirectoryShard(Fabric& fabric, duet::noc::TileId tile)
    : fabric_(fabric), tile_(tile) {}

int DirectoryShard::tile_index(TileId t) const {
  return t.y * fabric_.mesh().params().nx + t.x;
}

TileId DirectoryShard::tile_id(int idx) const {
  int nx = fabric_.mesh().params().nx;
  return TileId{idx % nx, idx / nx};
}

void DirectoryShard::send(NocMessage msg) {
  msg.src = tile_;
  fabric_.mesh().send(std::move(msg));
}

void DirectoryShard::handle_noc(const NocMessage& msg) {
  // Pipelined service: latency per message, minimum spacing of
  // directory_occupancy between message starts.
  SimTime now = fabric_.engine().now();
  SimTime period = fabric_.sys().period_ps();
  SimTime start = std::max(now, next_free_);
  next_free_ = start + fabric_.config().directory_occupancy * period;
  SimTime done = start + fabric_.config().directory_latency * period;
  if (msg.trace) msg.trace->add(duet::sim::Phase::FastCache, now, done);
  fabric_.engine().schedule_at(done, fabric_.sys(),
                               [this, msg]() { service(msg); });
}

void DirectoryShard::service(const NocMessage& msg) {
  ++messages_handled;
  Entry& e = entries_[msg.address];
  bool is_new_request = msg.op == kGetS || msg.op == kGetM ||
                        msg.op == kPutM || msg.op == kPutClean;
  if (e.busy && is_new_request) {
    e.deferred.push_back(msg);
    return;
  }
  process(msg);
}

void DirectoryShard::fetch_image(std::uint64_t line,
                                 const NocMessage& original) {
  Entry& e = entries_[line];
  e.busy = true;
  awaiting_memory_.emplace(line, original);
  NocMessage req;
  req.dst = fabric_.memctl_tile();
  req.msg_class = MsgClass::CoherenceReq;
  req.op = kMemRead;
  req.address = line;
  req.trace = original.trace;
  send(std::move(req));
}

void DirectoryShard::grant(Entry& e, std::uint64_t line, TileId to,
                           int data_op, const duet::sim::PhaseLogPtr& trace) {
  NocMessage resp;
  resp.dst = to;
  resp.msg_class = MsgClass::CoherenceResp;
  resp.op = data_op;
  resp.address = line;
  resp.payload = e.image;
  resp.trace = trace;
  send(std::move(resp));
}

void DirectoryShard::unblock(std::uint64_t line) {
  Entry& e = entries_[line];
  e.busy = false;
  e.trace = nullptr;
  while (!e.busy && !e.deferred.empty()) {
    NocMessage next = e.deferred.front();
    e.deferred.pop_front();
    process(next);
  }
}

void DirectoryShard::process(const NocMessage& msg) {
  std::uint64_t line = msg.address;
  Entry& e = entries_[line];
  int requester = tile_index(msg.src);

  switch (msg.op) {
    case kGetS: {
      if (!e.image_valid && e.state == State::I) {
        fetch_image(line, msg);
        return;
      }
      switch (e.state) {
        case State::I:
          e.state = State::EM;
          e.owner = requester;
          grant(e, line, msg.src, kDataE, msg.trace);
          break;
        case State::S:
          e.sharers.insert(requester);
          grant(e, line, msg.src, kDataS, msg.trace);
          break;
        case State::EM: {
          e.busy = true;
          e.requester = msg.src;
          e.req_op = kGetS;
          e.trace = msg.trace;
          ++secondary_writebacks;
          NocMessage fwd;
          fwd.dst = tile_id(e.owner);
          fwd.msg_class = MsgClass::CoherenceInv;
          fwd.op = kFwdGetS;
          fwd.address = line;
          fwd.origin = msg.src;
          fwd.trace = msg.trace;
          send(std::move(fwd));
          break;
        }
      }
      break;
    }

    case kGetM: {
      if (!e.image_valid && e.state == State::I) {
        fetch_image(line, msg);
        return;
      }
      switch (e.state) {
        case State::I:
          e.state = State::EM;
          e.owner = requester;
          grant(e, line, msg.src, kDataM, msg.trace);
          break;
        case State::S: {
          e.requester_was_sharer = e.sharers.count(requester) > 0;
          std::vector<int> to_invalidate;
          for (int s : e.sharers)
            if (s != requester) to_invalidate.push_back(s);
          if (to_invalidate.empty()) {
            e.sharers.clear();
            e.state = State::EM;
            e.owner = requester;
            grant(e, line, msg.src, kDataM, msg.trace);
            break;
          }
          e.busy = true;
          e.requester = msg.src;
          e.req_op = kGetM;
          e.trace = msg.trace;
          e.pending_acks = 0;
          bool skip_one =
              fabric_.fault == FaultInjection::StaleDirectorySharer;
          for (int s : to_invalidate) {
            if (skip_one && s == to_invalidate.back()) continue;
            ++e.pending_acks;
            NocMessage inv;
            inv.dst = tile_id(s);
            inv.msg_class = MsgClass::CoherenceInv;
            inv.op = kInvReq;
            inv.address = line;
            inv.origin = msg.src;
            inv.trace = msg.trace;
            send(std::move(inv));
          }
          if (e.pending_acks == 0) {
            // All invalidations "absorbed" by the injected fault.
            e.sharers.clear();
            e.state = State::EM;
            e.owner = requester;
            e.busy = false;
            grant(e, line, msg.src, kDataM, msg.trace);
          }
          break;
        }
        case State::EM: {
          if (e.owner == requester) {
            grant(e, line, msg.src, kDataM, msg.trace);
            break;
          }
          e.busy = true;
          e.requester = msg.src;
          e.req_op = kGetM;
          e.trace = msg.trace;
          ++secondary_writebacks;
          NocMessage fwd;
          fwd.dst = tile_id(e.owner);
          fwd.msg_class = MsgClass::CoherenceInv;
          fwd.op = kFwdGetM;
          fwd.address = line;
          fwd.origin = msg.src;
          fwd.trace = msg.trace;
          send(std::move(fwd));
          break;
        }
      }
      break;
    }

    case kOwnerData: {
      bool dirty = msg.value & 1;
      bool owner_gone = msg.value & 2;
      if (dirty || !e.image_valid) {
        e.image = msg.payload;
        e.image_valid = true;
      }
      int old_owner = e.owner;
      if (e.req_op == kGetS) {
        e.state = State::S;
        e.sharers.clear();
        if (!owner_gone) e.sharers.insert(old_owner);
        e.sharers.insert(tile_index(e.requester));
        e.owner = -1;
        grant(e, line, e.requester, kDataS, e.trace);
      } else {
        e.state = State::EM;
        e.owner = tile_index(e.requester);
        grant(e, line, e.requester, kDataM, e.trace);
      }
      unblock(line);
      break;
    }

    case kInvAck: {
      if (e.pending_acks == 0)
        throw std::logic_error("unexpected InvAck at directory");
      if (--e.pending_acks == 0) {
        e.sharers.clear();
        e.state = State::EM;
        e.owner = tile_index(e.requester);
        grant(e, line, e.requester, kDataM, e.trace);
        unblock(line);
      }
      break;
    }

    case kPutM: {
      NocMessage ack;
      ack.dst = msg.src;
      ack.msg_class = MsgClass::CoherenceResp;
      ack.op = kPutAck;
      ack.address = line;
      if (e.state == State::EM && e.owner == requester) {
        e.image = msg.payload;
        e.image_valid = true;
        e.state = State::I;
        e.owner = -1;
      }
      // Stale PutM (owner changed while the writeback was in flight): the
      // data already travelled through an OwnerData; just acknowledge.
      send(std::move(ack));
      break;
    }

    case kPutClean: {
      NocMessage ack;
      ack.dst = msg.src;
      ack.msg_class = MsgClass::CoherenceResp;
      ack.op = kPutAck;
      ack.address = line;
      if (e.state == State::EM && e.owner == requester) {
        e.state = State::I;
        e.owner = -1;
      } else if (e.state == State::S) {
        e.sharers.erase(requester);
        if (e.sharers.empty()) e.state = State::I;
      }
      send(std::move(ack));
      break;
    }

    case kMemData: {
      e.image = msg.payload;
      e.image_valid = true;
      auto node = awaiting_memory_.extract(line);
      e.busy = false;
      if (!node.empty()) process(node.mapped());
      if (!entries_[line].busy) unblock(line);
      break;
    }

    default:
      throw std::logic_error("unexpected message at directory shard, op=" +
                             std::to_string(msg.op));
  }
}

void DirectoryShard::audit() const {
  Scoreboard* sb = fabric_.scoreboard();
  if (!sb) return;
  for (const auto& [line, e] : entries_) {
    std::set<int> sharer_caches;
    for (int s : e.sharers) sharer_caches.insert(s);
    sb->audit_directory_line(line, sharer_caches,
                             e.state == State::EM ? e.owner : -1);
    if (e.image_valid && e.state != State::EM)
      sb->audit_image_data(line, e.image);
  }
}

void MemoryController::handle_noc(const NocMessage& msg) {
  if (msg.op != kMemRead)
    throw std::logic_error("unexpected message at memory controller");
  NocMessage resp;
  resp.src = tile_;
  resp.dst = msg.src;
  resp.msg_class = MsgClass::CoherenceResp;
  resp.op = kMemData;
  resp.address = msg.address;
  resp.payload = peek_line(msg.address);
  resp.trace = msg.trace;
  SimTime now = fabric_.engine().now();
  SimTime done =
      now + fabric_.config().memory_latency * fabric_.sys().period_ps();
  if (msg.trace) msg.trace->add(duet::sim::Phase::FastCache, now, done);
  fabric_.engine().schedule_at(
      done, fabric_.sys(),
      [this, resp = std::move(resp)]() { fabric_.mesh().send(resp); });
}

void MemoryController::poke(std::uint64_t addr,
                            const std::vector<std::uint8_t>& bytes) {
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes_[addr + i] = bytes[i];
  if (fabric_.scoreboard()) fabric_.scoreboard()->poke_model(addr, bytes);
}

void MemoryController::poke_u64(std::uint64_t addr, std::uint32_t size,
                                std::uint64_t value) {
  std::vector<std::uint8_t> b(size);
  for (std::uint32_t i = 0; i < size; ++i)
    b[i] = std::uint8_t(value >> (8 * i));
  poke(addr, b);
}

std::vector<std::uint8_t> MemoryController::peek_line(
    std::uint64_t line) const {
  std::vector<std::uint8_t> out(fabric_.config().line_bytes, 0);
  for (std::uint32_t i = 0; i < out.size(); ++i) {
    auto it = bytes_.find(line + i);
    if (it != bytes_.end()) out[i] = it->second;
  }
  return out;
}

}  // namespace duet::coherence
