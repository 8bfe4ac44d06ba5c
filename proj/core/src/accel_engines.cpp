#include "duet/accel/engines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace duet::accel {

using adapter::LocalKind;
using adapter::LocalMsg;
using duet::sim::await_value;
using duet::sim::Future;
using duet::sim::make_future;
using duet::sim::Task;

namespace {

std::uint64_t le64(const std::vector<std::uint8_t>& bytes, std::size_t off) {
  std::uint64_t v = 0;
  for (unsigned i = 0; i < 8; ++i) v |= std::uint64_t(bytes[off + i]) << (8 * i);
  return v;
}

}  // namespace

// ---- HubPort ----------------------------------------------------------

HubPort::HubPort(duet::sim::Engine& engine, const duet::sim::ClockDomain& fpga,
                 adapter::LocalPort& hub)
    : engine_(engine), fpga_(fpga), hub_(hub) {
  hub_.set_efpga_sink([this](const LocalMsg& m) { on_egress(m); });
}

void HubPort::issue(LocalMsg m, AckFn on_ack) {
  sendq_.push_back({std::move(m), std::move(on_ack)});
  if (!pump_armed_) pump();
}

void HubPort::pump() {
  pump_armed_ = false;
  if (sendq_.empty()) return;
  auto& [m, fn] = sendq_.front();
  int ack_kind = int(m.kind == LocalKind::Load ? LocalKind::LoadAck
                                               : LocalKind::StoreAck);
  if (hub_.request(m)) {
    waiting_[{ack_kind, m.addr}].push_back(std::move(fn));
    sendq_.pop_front();
  }
  // One issue attempt per FPGA edge, matching an initiation interval of 1.
  if (!sendq_.empty()) {
    pump_armed_ = true;
    engine_.schedule_in_cycles(fpga_, 1, [this] { pump(); });
  }
}

void HubPort::on_egress(const LocalMsg& m) {
  if (m.kind == LocalKind::Inv) return;  // no soft cache behind this port
  auto it = waiting_.find({int(m.kind), m.addr});
  if (it == waiting_.end() || it->second.empty())
    throw std::logic_error("unmatched local-protocol ack");
  AckFn fn = std::move(it->second.front());
  it->second.pop_front();
  if (it->second.empty()) waiting_.erase(it);
  fn(m);
}

// ---- EngineBase -------------------------------------------------------

EngineBase::EngineBase(adapter::ControlHub& ctl, duet::sim::Engine& engine,
                       const duet::sim::ClockDomain& fpga,
                       const AcceleratorDescriptor& desc)
    : ctl_(ctl), engine_(engine), fpga_(fpga), desc_(desc) {
  for (auto [reg, kind] : desc_.register_map) ctl_.define_register(reg, kind);
  ctl_.set_fpga_bound_notify([this](std::uint64_t reg) { on_work(reg); });
}

void EngineBase::finish_after(std::uint64_t fpga_cycles,
                              std::function<void()> fn) {
  engine_.schedule_in_cycles(fpga_, fpga_cycles, std::move(fn));
}

// ---- Tangent ----------------------------------------------------------

TangentEngine::TangentEngine(adapter::ControlHub& ctl,
                             duet::sim::Engine& engine,
                             const duet::sim::ClockDomain& fpga,
                             std::uint64_t pipeline_depth)
    : EngineBase(ctl, engine, fpga, find_descriptor("tangent")),
      depth_(pipeline_depth) {}

void TangentEngine::on_work(std::uint64_t) {
  while (auto v = ctl_.pop_fpga_bound(kRegArg)) {
    double x = double_of(*v);
    std::uint64_t out =
        TangentPwl::in_domain(x) ? bits_of(pwl_.eval(x)) : kTangentErrorBits;
    finish_after(depth_, [this, out] { ctl_.push_cpu_bound(kRegResult, out); });
  }
}

// ---- Popcount ---------------------------------------------------------

PopcountEngine::PopcountEngine(adapter::ControlHub& ctl,
                               adapter::LocalPort& hub,
                               duet::sim::Engine& engine,
                               const duet::sim::ClockDomain& fpga)
    : EngineBase(ctl, engine, fpga, find_descriptor("popcount")),
      port_(engine, fpga, hub),
      line_bytes_(hub.fabric().config().line_bytes) {}

void PopcountEngine::on_work(std::uint64_t) {
  while (auto v = ctl_.pop_fpga_bound(kRegArg)) {
    std::uint64_t base = *v;
    unsigned nlines = 64 / line_bytes_;  // 512 bits
    auto state = std::make_shared<std::pair<std::uint64_t, unsigned>>(0, nlines);
    for (unsigned i = 0; i < nlines; ++i) {
      LocalMsg m;
      m.kind = LocalKind::Load;
      m.addr = base + i * line_bytes_;
      m.size = line_bytes_;
      port_.issue(m, [this, state](const LocalMsg& ack) {
        for (std::uint8_t b : ack.data) state->first += std::popcount(b);
        if (--state->second == 0) {
          std::uint64_t count = state->first;
          finish_after(8, [this, count] {
            ctl_.push_cpu_bound(kRegResult, count);
          });
        }
      });
    }
  }
}

// ---- Sort -------------------------------------------------------------

SortEngine::SortEngine(adapter::ControlHub& ctl, adapter::LocalPort& read_hub,
                       adapter::LocalPort& write_hub,
                       duet::sim::Engine& engine,
                       const duet::sim::ClockDomain& fpga, unsigned n)
    : EngineBase(ctl, engine, fpga,
                 find_descriptor("sort" + std::to_string(n))),
      read_port_(engine, fpga, read_hub),
      write_port_(engine, fpga, write_hub),
      n_(n),
      line_bytes_(read_hub.fabric().config().line_bytes) {}

void SortEngine::on_work(std::uint64_t) {
  while (ctl_.pop_fpga_bound(kRegArg)) {
    std::uint64_t src = ctl_.device_reg(kRegParam0);
    std::uint64_t dst = ctl_.device_reg(kRegParam1);
    std::uint64_t total = std::uint64_t(n_) * 4;
    unsigned nlines = total / line_bytes_;
    auto buf = std::make_shared<std::vector<std::uint8_t>>(total);
    auto remaining = std::make_shared<unsigned>(nlines);
    for (unsigned i = 0; i < nlines; ++i) {
      LocalMsg m;
      m.kind = LocalKind::Load;
      m.addr = src + i * line_bytes_;
      m.size = line_bytes_;
      port_issue_read(m, src, buf, remaining, dst, total);
    }
  }
}

// Helper kept out of the lambda nest: handles one input line, and once the
// whole array is in, sorts and streams it back out 8 bytes at a time.
void SortEngine::port_issue_read(
    const adapter::LocalMsg& m, std::uint64_t src,
    std::shared_ptr<std::vector<std::uint8_t>> buf,
    std::shared_ptr<unsigned> remaining, std::uint64_t dst,
    std::uint64_t total) {
  read_port_.issue(m, [this, src, buf, remaining, dst,
                       total](const LocalMsg& ack) {
    std::copy(ack.data.begin(), ack.data.end(),
              buf->begin() + (ack.addr - src));
    if (--*remaining != 0) return;

    std::vector<std::uint32_t> vals(n_);
    std::memcpy(vals.data(), buf->data(), total);
    // A bitonic network of log2(n)*(log2(n)+1)/2 merge stages, one clock
    // per stage once the array is resident.
    unsigned lg = std::bit_width(n_) - 1;
    std::uint64_t net_cycles = lg * (lg + 1) / 2;
    std::sort(vals.begin(), vals.end());
    std::memcpy(buf->data(), vals.data(), total);

    finish_after(net_cycles, [this, buf, dst, total] {
      unsigned nstores = total / 8;  // the 8-byte store limit
      auto left = std::make_shared<unsigned>(nstores);
      for (unsigned j = 0; j < nstores; ++j) {
        LocalMsg st;
        st.kind = LocalKind::Store;
        st.addr = dst + j * 8;
        st.size = 8;
        st.value = le64(*buf, j * 8);
        write_port_.issue(st, [this, left](const LocalMsg&) {
          if (--*left == 0) ctl_.push_cpu_bound(kRegResult, 1);
        });
      }
    });
  });
}

// ---- Dijkstra ---------------------------------------------------------

DijkstraEngine::DijkstraEngine(adapter::ControlHub& ctl,
                               adapter::LocalPort& hub,
                               duet::sim::Engine& engine,
                               const duet::sim::ClockDomain& fpga)
    : EngineBase(ctl, engine, fpga, find_descriptor("dijkstra")),
      soft_(engine, fpga, hub) {}

void DijkstraEngine::on_work(std::uint64_t) {
  while (auto v = ctl_.pop_fpga_bound(kRegArg)) run(*v);
}

Task DijkstraEngine::run(std::uint64_t source) {
  std::uint64_t n = ctl_.device_reg(kRegParam0);
  std::uint64_t row = ctl_.device_reg(kRegParam1);
  std::uint64_t col = ctl_.device_reg(kRegParam2);
  std::uint64_t wts = ctl_.device_reg(kRegParam3);
  std::uint64_t out = ctl_.device_reg(kRegParam4);

  constexpr std::uint64_t kInf = ~0ull;
  std::vector<std::uint64_t> dist(n, kInf);
  dist[source] = 0;
  using Qe = std::pair<std::uint64_t, std::uint64_t>;
  std::priority_queue<Qe, std::vector<Qe>, std::greater<>> pq;
  pq.push({0, source});
  bool error = false;

  while (!pq.empty() && !error) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d != dist[u]) continue;  // superseded entry
    std::uint64_t lo = co_await await_value(soft_.read(row + 8 * u, 8));
    std::uint64_t hi = co_await await_value(soft_.read(row + 8 * (u + 1), 8));
    for (std::uint64_t k = lo; k < hi; ++k) {
      std::uint64_t vtx = co_await await_value(soft_.read(col + 8 * k, 8));
      std::uint64_t w = co_await await_value(soft_.read(wts + 8 * k, 8));
      if (std::int64_t(w) < 0) {
        error = true;
        break;
      }
      if (d + w < dist[vtx]) {
        dist[vtx] = d + w;
        pq.push({dist[vtx], vtx});
      }
    }
  }

  if (!error)
    for (std::uint64_t i = 0; i < n; ++i)
      co_await await_value(soft_.write(out + 8 * i, 8, dist[i]));
  ctl_.push_cpu_bound(kRegResult, error ? 1 : 0);
}

// ---- Barnes-Hut force kernels -----------------------------------------

BarnesHutEngine::BarnesHutEngine(adapter::ControlHub& ctl,
                                 adapter::LocalPort& hub,
                                 duet::sim::Engine& engine,
                                 const duet::sim::ClockDomain& fpga)
    : EngineBase(ctl, engine, fpga, find_descriptor("barneshut")),
      port_(engine, fpga, hub),
      line_bytes_(hub.fabric().config().line_bytes) {}

Future<std::vector<std::uint8_t>> BarnesHutEngine::load_line(
    std::uint64_t addr) {
  auto fut = make_future<std::vector<std::uint8_t>>();
  LocalMsg m;
  m.kind = LocalKind::Load;
  m.addr = addr;
  m.size = line_bytes_;
  port_.issue(m, [fut](const LocalMsg& ack) { fut->complete(ack.data); });
  return fut;
}

void BarnesHutEngine::on_work(std::uint64_t) {
  while (auto v = ctl_.pop_fpga_bound(kRegArg)) run(*v);
}

Task BarnesHutEngine::run(std::uint64_t item) {
  bool approx = item >> 63;
  std::uint32_t a = (item >> 32) & 0x7fffffff;
  std::uint32_t b = std::uint32_t(item);
  std::uint64_t pbase = ctl_.device_reg(kRegParam0);
  std::uint64_t nbase = ctl_.device_reg(kRegParam1);

  // Particle records: {x, y, z, mass}, 32 bytes. Tree-node records add the
  // cell radius and pad to 48: {x, y, z, total_mass, radius, pad}.
  std::vector<std::uint8_t> brec, arec;
  for (unsigned i = 0; i < 32 / line_bytes_; ++i) {
    auto part =
        co_await await_value(load_line(pbase + 32 * b + i * line_bytes_));
    brec.insert(brec.end(), part.begin(), part.end());
  }
  std::uint64_t abase = approx ? nbase + 48 * a : pbase + 32 * a;
  unsigned abytes = approx ? 48 : 32;
  for (unsigned i = 0; i < abytes / line_bytes_; ++i) {
    auto part = co_await await_value(load_line(abase + i * line_bytes_));
    arec.insert(arec.end(), part.begin(), part.end());
  }

  double bx = double_of(le64(brec, 0)), by = double_of(le64(brec, 8));
  double bz = double_of(le64(brec, 16)), bm = double_of(le64(brec, 24));
  double ax = double_of(le64(arec, 0)), ay = double_of(le64(arec, 8));
  double az = double_of(le64(arec, 16)), am = double_of(le64(arec, 24));

  // Softened monopole gravity; CalcForce is the same expression with the
  // interaction partner being a single particle instead of a cell's center
  // of mass.
  double dx = ax - bx, dy = ay - by, dz = az - bz;
  double r2 = dx * dx + dy * dy + dz * dz + kSoftening * kSoftening;
  double inv = kG * am * bm / (r2 * std::sqrt(r2));

  std::uint64_t fx = bits_of(dx * inv);
  std::uint64_t fy = bits_of(dy * inv);
  std::uint64_t fz = bits_of(dz * inv);
  finish_after(4 * desc_.pipeline_ii, [this, fx, fy, fz] {
    ctl_.push_cpu_bound(kRegResult, fx);
    ctl_.push_cpu_bound(kRegResult, fy);
    ctl_.push_cpu_bound(kRegResult, fz);
  });
}

// ---- Lock-free frontier queue -----------------------------------------

LockfreeQueueEngine::LockfreeQueueEngine(adapter::ControlHub& ctl,
                                         duet::sim::Engine& engine,
                                         const duet::sim::ClockDomain& fpga)
    : EngineBase(ctl, engine, fpga, find_descriptor("bfs_queue")) {}

void LockfreeQueueEngine::on_work(std::uint64_t) {
  while (auto v = ctl_.pop_fpga_bound(kRegArg)) {
    // Data first, then the token: the in-order return stream guarantees the
    // value is readable by the time a consumer wins the token.
    ctl_.push_cpu_bound(kRegResult, *v);
    ctl_.add_tokens(kRegToken, 1);
  }
}

// ---- PDES scheduler ---------------------------------------------------

PdesEngine::PdesEngine(adapter::ControlHub& ctl, adapter::LocalPort& hub,
                       duet::sim::Engine& engine,
                       const duet::sim::ClockDomain& fpga)
    : EngineBase(ctl, engine, fpga, find_descriptor("pdes")),
      port_(engine, fpga, hub),
      line_bytes_(hub.fabric().config().line_bytes) {
  ctl_.set_device_handler([this](std::uint64_t reg, bool is_write,
                                 std::uint64_t,
                                 adapter::ControlHub::DeviceRespond respond) {
    if (reg == kRegNext && !is_write)
      serve_next(std::move(respond));
    else
      respond(0);
  });
}

void PdesEngine::on_work(std::uint64_t) {
  while (auto v = ctl_.pop_fpga_bound(kRegArg)) {
    std::uint64_t ptr = *v;
    LocalMsg m;
    m.kind = LocalKind::Load;
    m.addr = ptr;
    m.size = line_bytes_;
    // The record's first 8 bytes hold its timestamp.
    port_.issue(m, [this, ptr](const LocalMsg& ack) {
      std::uint64_t ts = le64(ack.data, ptr % line_bytes_);
      if (ts < horizon_) {
        ++errors_;  // scheduled into the past: conservative window violated
        ctl_.set_shadow(kRegStatus, errors_);
        return;
      }
      ready_.push({ts, ptr});
    });
  }
}

void PdesEngine::serve_next(adapter::ControlHub::DeviceRespond respond) {
  if (ready_.empty()) {
    respond(adapter::kEmptyToken);
    return;
  }
  auto [ts, ptr] = ready_.top();
  ready_.pop();
  horizon_ = ts;
  respond(ptr);
}

}  // namespace duet::accel
