#pragma once

#include <chrono>
#include <stdexcept>
#include <string>

namespace rtopf {

// Input-side failure: unreadable files, schema mismatches, violated data
// invariants. The CLI maps this to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Breach of an internal contract. Never expected on valid inputs; the CLI
// maps this to exit code 2.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

// Cooperative deadline shared by all scenario solves of one batch. Solvers
// poll it between outer iterations and abort to a fallback solution once it
// has expired. A default-constructed token never expires.
class DeadlineToken {
 public:
  using Clock = std::chrono::steady_clock;

  DeadlineToken() = default;
  explicit DeadlineToken(Clock::time_point deadline)
      : deadline_(deadline), limited_(true) {}

  static DeadlineToken after(double seconds) {
    return DeadlineToken(Clock::now() +
                         std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double>(seconds)));
  }

  bool limited() const { return limited_; }
  bool expired() const { return limited_ && Clock::now() >= deadline_; }

 private:
  Clock::time_point deadline_{};
  bool limited_ = false;
};

}  // namespace rtopf
