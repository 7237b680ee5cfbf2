#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ccprobe/common.hpp"

namespace ccprobe {

// Direction from the prober's point of view.
enum class Direction : std::uint8_t { kTx, kRx };

enum class EventKind : std::uint8_t { kSyn, kSynAck, kData, kAck, kRst, kFin };

struct TraceEvent {
  std::int64_t t_us = 0;
  Direction dir = Direction::kTx;
  EventKind kind = EventKind::kAck;
  Bytes seq = 0;
  Bytes len = 0;
  Bytes ack = 0;
  std::uint32_t ip_id = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// Everything the prober saw or emitted, in time order.
struct ObservedTrace {
  std::vector<TraceEvent> events;
  // Set when recording stopped at the event cap. Not part of the file format.
  bool overflowed = false;

  friend bool operator==(const ObservedTrace&, const ObservedTrace&) = default;
};

std::string_view to_string(Direction d);
std::string_view to_string(EventKind k);

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class TraceValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Returns an empty string for a valid trace, otherwise the first violation.
std::string trace_violation(const ObservedTrace& trace);

// One JSON object per line, keys exactly t_us, dir, kind, seq, len, ack, ip_id.
void write_trace(const ObservedTrace& trace, std::ostream& sink);

// Throws TraceParseError (with 1-based line number) on malformed lines and
// TraceValidationError on well-formed but invalid content (e.g. unsorted).
ObservedTrace read_trace(std::istream& source);

enum class PlotMarker : std::uint8_t { kPacket, kAck };

std::string_view to_string(PlotMarker m);

struct PlotRow {
  std::int64_t t_us = 0;
  Bytes y = 0;
  PlotMarker marker = PlotMarker::kPacket;

  friend bool operator==(const PlotRow&, const PlotRow&) = default;
};

// Time-sequence graph points: received data as (t, seq + len, packet), sent
// ACKs as (t, ack, ack).
std::vector<PlotRow> emit_plot_points(const ObservedTrace& trace);

// Header "t_us,y,marker" followed by one row per point.
void write_plot(const std::vector<PlotRow>& rows, std::ostream& sink);

}  // namespace ccprobe
