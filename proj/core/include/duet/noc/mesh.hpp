#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "duet/noc/message.hpp"
#include "duet/sim/engine.hpp"

namespace duet::noc {

struct MeshParams {
  int nx = 2;
  int ny = 2;
  std::uint64_t hop_latency_cycles = 1;
  std::uint64_t serialization_cycles = 1;
};

/// 2D mesh with dimension-ordered (X-then-Y) routing and per-source-
/// destination-pair in-order delivery on each virtual channel. Router
/// buffering is infinite; congestion is modeled through per-source-port
/// link serialization only.
class Mesh {
 public:
  using Handler = std::function<void(const NocMessage&)>;

  Mesh(duet::sim::Engine& engine, const duet::sim::ClockDomain& sys,
       MeshParams params)
      : engine_(engine), sys_(sys), params_(params) {
    tiles_.resize(params.nx * params.ny);
  }

  const MeshParams& params() const { return params_; }

  void set_tile_kind(TileId t, TileKind k) { tile(t).kind = k; }
  TileKind tile_kind(TileId t) const { return tiles_[index(t)].kind; }

  void attach(TileId t, Handler h) { tile(t).handler = std::move(h); }

  bool in_bounds(TileId t) const {
    return t.x >= 0 && t.x < params_.nx && t.y >= 0 && t.y < params_.ny;
  }

  /// Hop list of the X-then-Y path, excluding src, including dst.
  std::vector<TileId> route(TileId src, TileId dst) const {
    check_bounds(src);
    check_bounds(dst);
    std::vector<TileId> hops;
    TileId cur = src;
    while (cur.x != dst.x) {
      cur.x += (dst.x > cur.x) ? 1 : -1;
      hops.push_back(cur);
    }
    while (cur.y != dst.y) {
      cur.y += (dst.y > cur.y) ? 1 : -1;
      hops.push_back(cur);
    }
    return hops;
  }

  std::size_t hop_count(TileId src, TileId dst) const {
    check_bounds(src);
    check_bounds(dst);
    return std::size_t(std::abs(src.x - dst.x) + std::abs(src.y - dst.y));
  }

  /// Queues a message for delivery. Latency is serialization plus per-hop
  /// latency times hop count, counted from when the source port is free.
  void send(NocMessage msg) {
    check_bounds(msg.src);
    check_bounds(msg.dst);
    unsigned vc = channel_of(msg.msg_class);
    msg.seq = next_seq_[order_key(msg, vc)]++;

    duet::sim::SimTime now = engine_.now();
    duet::sim::SimTime period = sys_.period_ps();
    auto& port_free = port_free_[{index(msg.src), vc}];
    duet::sim::SimTime depart = std::max(now, port_free);
    port_free = depart + params_.serialization_cycles * period;

    duet::sim::SimTime deliver =
        depart + (params_.serialization_cycles +
                  hop_count(msg.src, msg.dst) * params_.hop_latency_cycles) *
                     period;
    // Same-pair same-channel messages never overtake.
    auto& last = last_delivery_[order_key(msg, vc)];
    deliver = std::max(deliver, last);
    last = deliver;

    ++sent_count_[static_cast<unsigned>(msg.msg_class)];
    if (msg.trace) msg.trace->add(duet::sim::Phase::Noc, now, deliver);

    engine_.schedule_at(deliver, sys_, [this, m = std::move(msg)]() {
      Handler& h = tiles_[index(m.dst)].handler;
      if (!h)
        throw std::logic_error("NoC message to unattached tile " +
                               to_string(m.dst));
      h(m);
    });
  }

  std::uint64_t sent_count(MsgClass c) const {
    return sent_count_[static_cast<unsigned>(c)];
  }

 private:
  struct Tile {
    TileKind kind = TileKind::PTile;
    Handler handler;
  };

  using OrderKey = std::tuple<int, int, unsigned>;  // src idx, dst idx, vc

  OrderKey order_key(const NocMessage& m, unsigned vc) const {
    return {index(m.src), index(m.dst), vc};
  }

  int index(TileId t) const { return t.y * params_.nx + t.x; }

  Tile& tile(TileId t) {
    check_bounds(t);
    return tiles_[index(t)];
  }

  void check_bounds(TileId t) const {
    if (!in_bounds(t))
      throw std::out_of_range("tile out of mesh bounds: " + to_string(t));
  }

  duet::sim::Engine& engine_;
  const duet::sim::ClockDomain& sys_;
  MeshParams params_;
  std::vector<Tile> tiles_;
  std::map<OrderKey, std::uint64_t> next_seq_;
  std::map<OrderKey, duet::sim::SimTime> last_delivery_;
  std::map<std::pair<int, unsigned>, duet::sim::SimTime> port_free_;
  std::array<std::uint64_t, 5> sent_count_{};
};

}  // namespace duet::noc
