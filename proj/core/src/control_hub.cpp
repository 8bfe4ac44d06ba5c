#include "duet/adapter/control_hub.hpp"

#include <stdexcept>

namespace duet::adapter {

using coherence::kMmioRead;
using coherence::kMmioResp;
using coherence::kMmioWrite;
using duet::noc::MsgClass;
using duet::noc::NocMessage;
using duet::sim::SimTime;

ControlHub::ControlHub(coherence::Fabric& fabric,
                       const duet::sim::ClockDomain& fpga,
                       duet::noc::TileId tile,
                       std::shared_ptr<AdapterState> state,
                       ControlParams params)
    : fabric_(fabric),
      fpga_(fpga),
      tile_(tile),
      state_(std::move(state)),
      params_(params),
      to_fpga_(fabric.engine(), fabric.sys(), fpga, params.fifo_capacity,
               params.sync_stages),
      from_fpga_(fabric.engine(), fpga, fabric.sys(), params.fifo_capacity,
                 params.sync_stages) {
  to_fpga_.set_sink([this](const StreamEntry& e) { fpga_arrive(e); });
  from_fpga_.set_sink([this](const ReturnMsg& m) { handle_return(m); });
  state_->add_deactivate_hook([this] {
    std::uint32_t status = kStatusTimeout;
    if (state_->error_code() == kErrParity) status = kStatusParity;
    if (state_->error_code() == kErrKilled) status = kStatusKilled;
    flush_blocked(status);
  });
}

void ControlHub::define_register(std::uint64_t reg, RegKind kind) {
  kinds_[reg] = kind;
  if (kind == RegKind::FpgaBoundFifo) fb_credits_[reg] = params_.fifo_capacity;
}

void ControlHub::handle_noc(const NocMessage& msg) {
  if (msg.op != kMmioRead && msg.op != kMmioWrite)
    throw std::logic_error("unexpected NoC message at control hub");
  auto t = std::make_shared<Txn>();
  t->proc_key = msg.src.y * fabric_.mesh().params().nx + msg.src.x;
  t->reply_to = msg.src;
  t->req_id = msg.req_id;
  t->reg = (msg.address - params_.mmio_base) / 8;
  t->is_write = msg.op == kMmioWrite;
  t->value = msg.value;
  t->trace = msg.trace;
  per_proc_[t->proc_key].push_back(t);
  SimTime start_t = fabric_.engine().now();
  fabric_.engine().schedule_in_cycles(
      fabric_.sys(), params_.decode_cycles, [this, t, start_t] {
        if (t->trace)
          t->trace->add(duet::sim::Phase::FastCache, start_t,
                        fabric_.engine().now());
        start(t);
      });
}

void ControlHub::bogus(const TxnPtr& t) {
  std::uint32_t status = kStatusOk;
  switch (state_->error_code()) {
    case kErrTimeout: status = kStatusTimeout; break;
    case kErrParity: status = kStatusParity; break;
    case kErrKilled: status = kStatusKilled; break;
    default: status = kStatusTimeout; break;
  }
  complete(t, kBogusValue, status);
}

void ControlHub::start(const TxnPtr& t) {
  ++accesses_served;

  // Hub-internal control registers work regardless of the active flag.
  if (t->reg == kErrorReg) {
    if (t->is_write) {
      state_->reactivate();
      complete(t, 0, kStatusOk);
    } else {
      complete(t, std::uint64_t(state_->error_code()), kStatusOk);
    }
    return;
  }

  if (!state_->active()) {
    // "Returns bogus data to all processor accesses": CPUs never hang on a
    // dead accelerator.
    bogus(t);
    return;
  }

  auto kit = kinds_.find(t->reg);
  RegKind kind = kit == kinds_.end() ? RegKind::Normal : kit->second;

  switch (kind) {
    case RegKind::Plain: {
      if (t->is_write) {
        mirror_[t->reg] = t->value;
        enqueue_stream({next_stream_id_++, t->reg, true, t->value, false,
                        false, t->trace});
      }
      std::uint64_t v = mirror_[t->reg];
      finish_shadow(t, t->is_write ? 0 : v, kStatusOk);
      break;
    }

    case RegKind::TokenFifo: {
      std::uint64_t v;
      if (t->is_write) {
        v = 0;  // tokens are produced by the accelerator, not by CPUs
      } else if (tokens_[t->reg] > 0) {
        --tokens_[t->reg];
        v = 1;
      } else {
        v = kEmptyToken;
      }
      finish_shadow(t, v, kStatusOk);
      break;
    }

    case RegKind::FpgaBoundFifo: {
      if (!t->is_write) {
        finish_shadow(t, kEmptyToken, kStatusOk);
        break;
      }
      auto& credits = fb_credits_[t->reg];
      if (credits == 0) {
        // Queue overflow: backpressure status, the CPU retries.
        finish_shadow(t, 0, kStatusBusy);
        break;
      }
      --credits;
      enqueue_stream({next_stream_id_++, t->reg, true, t->value, false, false,
                      t->trace});
      finish_shadow(t, 0, kStatusOk);
      break;
    }

    case RegKind::CpuBoundFifo: {
      if (t->is_write) {
        finish_shadow(t, 0, kStatusOk);
        break;
      }
      auto& q = cpu_bound_[t->reg];
      if (!q.empty()) {
        std::uint64_t v = q.front();
        q.pop_front();
        finish_shadow(t, v, kStatusOk);
        break;
      }
      t->stamp = ++stamp_gen_;
      blocked_reads_[t->reg].push_back(t);
      std::uint64_t stamp = t->stamp;
      fabric_.engine().schedule_in_cycles(
          fabric_.sys(), params_.blocking_timeout_cycles,
          [this, t, stamp] {
            if (t->done || t->stamp != stamp) return;
            ++timeouts;
            state_->deactivate(kErrTimeout, fabric_.engine().now());
            complete(t, kBogusValue, kStatusTimeout);
            flush_blocked(kStatusTimeout);
          });
      break;
    }

    case RegKind::Normal: {
      StreamEntry e{next_stream_id_++, t->reg, t->is_write, t->value, true,
                    false, t->trace};
      inflight_normal_[e.stream_id] = t;
      enqueue_stream(std::move(e));
      // The exception monitor's timeout on eFPGA responses.
      std::uint64_t limit = state_->switches.timeout_limit;
      fabric_.engine().schedule_in_cycles(fpga_, limit, [this, t] {
        if (t->done) return;
        ++timeouts;
        state_->deactivate(kErrTimeout, fabric_.engine().now());
        complete(t, kBogusValue, kStatusTimeout);
        flush_blocked(kStatusTimeout);
      });
      break;
    }
  }
}

void ControlHub::finish_shadow(const TxnPtr& t, std::uint64_t value,
                               std::uint32_t status) {
  if (!params_.downgrade_shadows) {
    SimTime start = fabric_.engine().now();
    fabric_.engine().schedule_in_cycles(
        fabric_.sys(), params_.shadow_ack_cycles,
        [this, t, value, status, start] {
          if (t->trace)
            t->trace->add(duet::sim::Phase::FastCache, start,
                          fabric_.engine().now());
          complete(t, value, status);
        });
    return;
  }
  // Downgraded platform: the semantic effect already happened above, but the
  // response has to make the full trip into the slow domain and back.
  StreamEntry e{next_stream_id_++, t->reg, t->is_write, value, true, true,
                t->trace};
  inflight_normal_[e.stream_id] = t;
  if (status != kStatusOk) inflight_status_[e.stream_id] = status;
  enqueue_stream(std::move(e));
}

void ControlHub::flush_blocked(std::uint32_t status) {
  for (auto& [reg, q] : blocked_reads_) {
    for (auto& t : q)
      if (!t->done) complete(t, kBogusValue, status);
    q.clear();
  }
}

void ControlHub::complete(const TxnPtr& t, std::uint64_t value,
                          std::uint32_t status) {
  if (t->done) return;
  t->done = true;
  t->resp_value = value;
  t->status = status;
  flush_responses(t->proc_key);
}

void ControlHub::flush_responses(int proc_key) {
  auto& q = per_proc_[proc_key];
  // Responses leave in issue order: a fast shadow completion parks behind a
  // still-running normal access from the same processor.
  while (!q.empty() && q.front()->done) {
    TxnPtr t = q.front();
    q.pop_front();
    NocMessage resp;
    resp.src = tile_;
    resp.dst = t->reply_to;
    resp.msg_class = MsgClass::MmioResp;
    resp.op = kMmioResp;
    resp.address = mmio_addr(t->reg);
    resp.value = t->resp_value;
    resp.size = t->status;
    resp.req_id = t->req_id;
    resp.trace = t->trace;
    fabric_.mesh().send(std::move(resp));
  }
}

void ControlHub::enqueue_stream(StreamEntry e) {
  stream_backlog_.push_back(std::move(e));
  pump_stream();
}

void ControlHub::pump_stream() {
  while (!stream_backlog_.empty() && to_fpga_.push(stream_backlog_.front()))
    stream_backlog_.pop_front();
  if (!stream_backlog_.empty() && !stream_pump_armed_) {
    stream_pump_armed_ = true;
    fabric_.engine().schedule_in_cycles(fabric_.sys(), 1, [this] {
      stream_pump_armed_ = false;
      pump_stream();
    });
  }
}

void ControlHub::fpga_arrive(const StreamEntry& e) {
  if (fpga_observer_ && !e.echo) fpga_observer_(e.reg, e.is_write, e.value);
  device_queue_.push_back(e);
  if (!device_busy_) run_device();
}

void ControlHub::run_device() {
  if (device_queue_.empty()) return;
  device_busy_ = true;
  StreamEntry e = device_queue_.front();
  device_queue_.pop_front();
  SimTime dev_start = fabric_.engine().now();
  fabric_.engine().schedule_in_cycles(fpga_, params_.device_cycles, [this, e,
                                                                     dev_start] {
    if (e.trace)
      e.trace->add(duet::sim::Phase::SlowCache, dev_start,
                   fabric_.engine().now());
    if (e.echo) {  // downgraded shadow response: bounce straight back
      send_return({ReturnMsg::NormalResp, e.reg, e.value, e.stream_id,
                   e.trace});
      device_busy_ = false;
      run_device();
      return;
    }
    auto kit = kinds_.find(e.reg);
    RegKind kind = kit == kinds_.end() ? RegKind::Normal : kit->second;
    switch (kind) {
      case RegKind::Plain:
        device_regs_[e.reg] = e.value;  // accelerator-visible copy
        break;
      case RegKind::FpgaBoundFifo:
        fpga_bound_[e.reg].push_back(e.value);
        if (fb_notify_) fb_notify_(e.reg);
        break;
      default: {  // Normal access
        if (device_) {
          std::uint64_t id = e.stream_id;
          auto trace = e.trace;
          device_(e.reg, e.is_write, e.value,
                  [this, id, trace](std::uint64_t v) {
                    send_return({ReturnMsg::NormalResp, 0, v, id, trace});
                  });
        } else {
          std::uint64_t v = 0;
          if (e.is_write)
            device_regs_[e.reg] = e.value;
          else
            v = device_regs_[e.reg];
          send_return({ReturnMsg::NormalResp, e.reg, v, e.stream_id, e.trace});
        }
        break;
      }
    }
    device_busy_ = false;
    run_device();
  });
}

void ControlHub::send_return(ReturnMsg m) {
  return_backlog_.push_back(std::move(m));
  pump_return();
}

void ControlHub::pump_return() {
  while (!return_backlog_.empty() && from_fpga_.push(return_backlog_.front()))
    return_backlog_.pop_front();
  if (!return_backlog_.empty() && !return_pump_armed_) {
    return_pump_armed_ = true;
    fabric_.engine().schedule_in_cycles(fpga_, 1, [this] {
      return_pump_armed_ = false;
      pump_return();
    });
  }
}

void ControlHub::handle_return(const ReturnMsg& m) {
  switch (m.type) {
    case ReturnMsg::NormalResp: {
      auto node = inflight_normal_.extract(m.stream_id);
      std::uint32_t status = kStatusOk;
      auto snode = inflight_status_.extract(m.stream_id);
      if (!snode.empty()) status = snode.mapped();
      if (!node.empty()) complete(node.mapped(), m.value, status);
      break;
    }
    case ReturnMsg::CpuBoundPush: {
      auto& blocked = blocked_reads_[m.reg];
      while (!blocked.empty() && blocked.front()->done) blocked.pop_front();
      if (!blocked.empty()) {
        TxnPtr t = blocked.front();
        blocked.pop_front();
        complete(t, m.value, kStatusOk);
      } else {
        cpu_bound_[m.reg].push_back(m.value);
      }
      break;
    }
    case ReturnMsg::TokenAdd:
      tokens_[m.reg] += m.value;
      break;
    case ReturnMsg::ShadowRefresh:
      mirror_[m.reg] = m.value;
      break;
  }
}

// ---- accelerator-side interface ---------------------------------------

void ControlHub::set_shadow(std::uint64_t reg, std::uint64_t value) {
  device_regs_[reg] = value;
  send_return({ReturnMsg::ShadowRefresh, reg, value, 0, nullptr});
}

void ControlHub::push_cpu_bound(std::uint64_t reg, std::uint64_t value) {
  send_return({ReturnMsg::CpuBoundPush, reg, value, 0, nullptr});
}

void ControlHub::add_tokens(std::uint64_t reg, std::uint64_t n) {
  send_return({ReturnMsg::TokenAdd, reg, n, 0, nullptr});
}

std::optional<std::uint64_t> ControlHub::pop_fpga_bound(std::uint64_t reg) {
  auto& q = fpga_bound_[reg];
  if (q.empty()) return std::nullopt;
  std::uint64_t v = q.front();
  q.pop_front();
  ++fb_credits_[reg];  // credit return modeled as instantaneous
  return v;
}

}  // namespace duet::adapter
