#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <thread>

namespace megart {

/// Engine time in microseconds. Integer ticks keep period arithmetic exact
/// under a virtual clock.
using Ticks = std::int64_t;

inline constexpr Ticks kTicksPerSecond = 1'000'000;
inline constexpr Ticks kTicksPerMilli = 1'000;

inline double to_seconds(Ticks t) { return static_cast<double>(t) / kTicksPerSecond; }
inline Ticks from_seconds(double s) { return static_cast<Ticks>(std::llround(s * kTicksPerSecond)); }

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Ticks now() const = 0;
  /// Blocks (or, for a virtual clock, advances time) for `d`.
  virtual void sleep_for(Ticks d) = 0;
  virtual bool is_virtual() const = 0;
};

/// Deterministic test clock. Time moves only through advance_to/sleep_for;
/// an observer sees every advance, which is how scripted scenarios release
/// events that fall inside a run.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Ticks start = 0) : now_(start) {}

  Ticks now() const override { return now_; }
  void sleep_for(Ticks d) override { advance_to(now_ + d); }
  bool is_virtual() const override { return true; }

  void advance_to(Ticks t) {
    if (t <= now_) return;
    now_ = t;
    if (on_advance_) on_advance_(now_);
  }

  void set_observer(std::function<void(Ticks)> fn) { on_advance_ = std::move(fn); }

 private:
  Ticks now_;
  std::function<void(Ticks)> on_advance_;
};

class SteadyClock final : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

  Ticks now() const override {
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() -
                                                                 origin_)
        .count();
  }
  void sleep_for(Ticks d) override {
    if (d > 0) std::this_thread::sleep_for(std::chrono::microseconds(d));
  }
  bool is_virtual() const override { return false; }

  std::chrono::steady_clock::time_point to_time_point(Ticks t) const {
    return origin_ + std::chrono::microseconds(t);
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

}  // namespace megart
