#pragma once

#include <chrono>
#include <ctime>

namespace amc {

// Wall and process CPU time since construction.
class Clock {
 public:
  Clock() : wall0_(std::chrono::steady_clock::now()), cpu0_(std::clock()) {}
  double wall() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0_).count();
  }
  double cpu() const { return static_cast<double>(std::clock() - cpu0_) / CLOCKS_PER_SEC; }

 private:
  std::chrono::steady_clock::time_point wall0_;
  std::clock_t cpu0_;
};

}  // namespace amc
