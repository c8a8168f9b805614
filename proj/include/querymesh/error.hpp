#pragma once

#include <stdexcept>
#include <string>

namespace querymesh {

// Bad flags, bad config files, unknown keys. Maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Everything else that stops a run: missing files, violated preconditions,
// diverged training. Maps to exit code 1.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw RuntimeError(msg);
}

}  // namespace querymesh
