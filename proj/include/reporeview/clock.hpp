#pragma once

#include <chrono>
#include <mutex>
#include <vector>

#include "reporeview/model.hpp"

namespace reporeview {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::chrono::system_clock::time_point now() const = 0;

  Timestamp now_seconds() const {
    return std::chrono::time_point_cast<std::chrono::seconds>(now());
  }
};

class SystemClock final : public Clock {
 public:
  std::chrono::system_clock::time_point now() const override {
    return std::chrono::system_clock::now();
  }
};

class FixedClock final : public Clock {
 public:
  explicit FixedClock(std::chrono::system_clock::time_point at) : at_(at) {}
  explicit FixedClock(Timestamp at) : at_(at) {}

  std::chrono::system_clock::time_point now() const override { return at_; }

 private:
  std::chrono::system_clock::time_point at_;
};

/// Blocks the caller between retry attempts.
class Sleeper {
 public:
  virtual ~Sleeper() = default;
  virtual void sleep_for(std::chrono::milliseconds d) = 0;
};

class RealSleeper final : public Sleeper {
 public:
  void sleep_for(std::chrono::milliseconds d) override;
};

/// Records requested waits without blocking.
class VirtualSleeper final : public Sleeper {
 public:
  void sleep_for(std::chrono::milliseconds d) override {
    std::lock_guard lock(mu_);
    waits_.push_back(d);
  }

  std::vector<std::chrono::milliseconds> waits() const {
    std::lock_guard lock(mu_);
    return waits_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::chrono::milliseconds> waits_;
};

}  // namespace reporeview
