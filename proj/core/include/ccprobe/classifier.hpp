#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ccprobe/common.hpp"
#include "ccprobe/prober.hpp"
#include "ccprobe/tcp_sender.hpp"
#include "ccprobe/trace_io.hpp"

namespace ccprobe {

enum class RetxKind : std::uint8_t { kNone, kFast, kTimeout };

enum class Label : std::uint8_t { kNewReno, kReno, kTahoe, kNoFastRetransmit, kRenoPlus, kUnclassifiable };

enum class ClassifyError : std::uint8_t { kReordering, kTraceOverflow, kIncomplete };

std::string_view to_string(RetxKind k);
std::string_view to_string(Label l);
std::string_view to_string(ClassifyError e);

// The label a correctly identified sender of this variant receives.
Label expected_label(Variant v);

struct Retransmission {
  int packet_index = 0;
  Micros arrival{0};
  RetxKind kind = RetxKind::kFast;
  // Sender silence preceding this arrival.
  Micros gap{0};
  std::size_t event = 0;  // position in the trace
};

// Feature names follow the default script (drops 13 and 16); with another
// script they refer to the first dropped index, the second dropped index, and
// the packet right after the second.
struct FeatureVector {
  Micros rtt_est{0};
  RetxKind retx13 = RetxKind::kNone;
  RetxKind retx16 = RetxKind::kNone;
  bool unnecessary_retx17 = false;
  bool extra_retx_between_13_and_16 = false;
  bool reordering_detected = false;
  // Retransmission arrivals of indices up to the ack-limit packet.
  int retransmission_count = 0;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct Evidence {
  std::optional<std::size_t> event;
  std::string note;
};

struct ClassificationReport {
  std::variant<Label, ClassifyError> outcome = ClassifyError::kIncomplete;
  FeatureVector features;
  std::vector<Evidence> evidence;

  bool has_label() const { return std::holds_alternative<Label>(outcome); }
  std::optional<Label> label() const;
  std::optional<ClassifyError> error() const;
};

struct ClassifierConfig {
  // A retransmission counts as timer-driven when the sender was silent for
  // longer than timeout_factor * rtt_est.
  double timeout_factor = 3.0;
  // Traces at or above this many events are treated as overflowed.
  std::optional<std::size_t> event_cap;
};

// SYN sent -> SYN+ACK received; falls back to request sent -> first data
// received. nullopt when neither exchange is present.
std::optional<Micros> estimate_rtt(const ObservedTrace& trace);

// A received data segment is a retransmission when it overlaps an earlier
// received range carried by a lower ip_id.
std::vector<Retransmission> detect_retransmissions(const ObservedTrace& trace, Micros rtt_est, Bytes mss,
                                                   double timeout_factor = 3.0);

// A disjoint data arrival carrying a lower ip_id than an earlier one.
bool detect_reordering(const ObservedTrace& trace);

ClassificationReport classify(const FeatureVector& features);

ClassificationReport classify_trace(const ObservedTrace& trace, const ProbeScript& script,
                                    const ClassifierConfig& config = {});

// Single JSON object: "label" or "error", then "features" and "evidence".
std::string report_to_json(const ClassificationReport& report);

}  // namespace ccprobe
