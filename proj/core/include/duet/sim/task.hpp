#pragma once

#include <coroutine>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace duet::sim {

/// Fire-and-forget coroutine used to express agent behavior (processor
/// programs, accelerator control loops) in straight-line style. The frame is
/// destroyed automatically when the coroutine runs off the end. Simulation
/// errors are fatal: an escaping exception terminates the process with a
/// message.
struct Task {
  struct promise_type {
    Task get_return_object() { return {}; }
    std::suspend_never initial_suspend() noexcept { return {}; }
    std::suspend_never final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() {
      try {
        std::rethrow_exception(std::current_exception());
      } catch (const std::exception& e) {
        std::fprintf(stderr, "fatal error in simulation task: %s\n", e.what());
      } catch (...) {
        std::fprintf(stderr, "fatal error in simulation task\n");
      }
      std::abort();
    }
  };
};

/// One-shot completion channel between an event-driven component and a
/// single awaiting coroutine. The component keeps one reference and calls
/// complete(); the coroutine co_awaits the other.
template <typename T>
class FutureState {
 public:
  void complete(T value) {
    value_ = std::move(value);
    if (waiter_) {
      auto w = std::exchange(waiter_, nullptr);
      w.resume();
    }
  }

  bool ready() const { return value_.has_value(); }
  const T& value() const { return *value_; }

  void set_waiter(std::coroutine_handle<> h) { waiter_ = h; }

 private:
  std::optional<T> value_;
  std::coroutine_handle<> waiter_ = nullptr;
};

template <typename T>
using Future = std::shared_ptr<FutureState<T>>;

template <typename T>
struct FutureAwaiter {
  Future<T> state;
  bool await_ready() const { return state->ready(); }
  void await_suspend(std::coroutine_handle<> h) { state->set_waiter(h); }
  T await_resume() { return state->value(); }
};

template <typename T>
FutureAwaiter<T> await_value(Future<T> f) {
  return FutureAwaiter<T>{std::move(f)};
}

template <typename T>
Future<T> make_future() {
  return std::make_shared<FutureState<T>>();
}

/// Global barrier across a fixed set of coroutine agents.
class Barrier {
 public:
  explicit Barrier(unsigned parties) : parties_(parties) {}

  struct Awaiter {
    Barrier* b;
    bool await_ready() const { return b->parties_ == 1; }
    bool await_suspend(std::coroutine_handle<> h) {
      // The last arriver releases everyone (in arrival order) and continues
      // without suspending.
      if (b->arrived_ + 1 == b->parties_) {
        b->arrived_ = 0;
        auto ws = std::move(b->waiters_);
        b->waiters_.clear();
        for (auto w : ws) w.resume();
        return false;
      }
      b->waiters_.push_back(h);
      ++b->arrived_;
      return true;
    }
    void await_resume() {}
  };

  friend struct Awaiter;

  Awaiter arrive() { return Awaiter{this}; }

 private:
  unsigned parties_;
  unsigned arrived_ = 0;
  std::vector<std::coroutine_handle<>> waiters_;
};

}  // namespace duet::sim
