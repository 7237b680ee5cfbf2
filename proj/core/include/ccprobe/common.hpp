#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ccprobe {

// Virtual time. The simulator never consults a wall clock.
using Micros = std::chrono::duration<std::int64_t, std::micro>;

// Byte offsets and lengths within one direction of a connection.
using Bytes = std::int64_t;

constexpr Micros from_ms(std::int64_t ms) { return Micros{ms * 1000}; }

constexpr double to_ms(Micros t) { return static_cast<double>(t.count()) / 1000.0; }

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Broken internal invariant (timer misuse, event-queue time regression).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ccprobe
