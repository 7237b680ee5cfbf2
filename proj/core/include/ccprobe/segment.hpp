#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ccprobe/common.hpp"

namespace ccprobe {

enum class Role : std::uint8_t { kServer, kProber };

enum Flag : std::uint8_t {
  kSyn = 0x01,
  kAck = 0x02,
  kFin = 0x04,
  kRst = 0x08,
};

// A simulated TCP-like segment. Sequence space is per direction and starts at
// zero after the handshake; SYN and FIN consume no sequence space.
struct Segment {
  Role src = Role::kServer;
  Bytes seq = 0;
  Bytes len = 0;
  Bytes ack = 0;
  std::uint8_t flags = 0;
  std::optional<Bytes> mss_option;
  std::uint32_t ip_id = 0;
  Micros sent_at{0};

  bool has(Flag f) const { return (flags & f) != 0; }
  bool is_payload() const { return len > 0; }
  Bytes end() const { return seq + len; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

// Returns an empty string when the segment satisfies its structural
// invariants, otherwise a short description of the violation.
std::string segment_violation(const Segment& seg);

std::string describe(const Segment& seg);

}  // namespace ccprobe
