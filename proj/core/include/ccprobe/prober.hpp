#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "ccprobe/common.hpp"
#include "ccprobe/segment.hpp"
#include "ccprobe/trace_io.hpp"

namespace ccprobe {

enum class CloseMode : std::uint8_t { kReset, kFin };

// The probe plan. Packet index k (1-based) is response bytes
// [(k-1)*mss, k*mss).
struct ProbeScript {
  Bytes mss = 100;
  std::set<int> drop_packets = {13, 16};
  int ack_limit_packet = 25;
  bool dupack_per_arrival = true;
  CloseMode close_mode = CloseMode::kReset;

  // Throws ConfigError.
  void validate() const;

  int packet_index(Bytes seq) const { return static_cast<int>(seq / mss) + 1; }
  Bytes packet_start(int index) const { return (index - 1) * mss; }
  Bytes ack_limit_bytes() const { return ack_limit_packet * mss; }
};

struct ProbeLimits {
  // Absolute virtual time after which the probe gives up.
  Micros deadline = from_ms(60000);
  std::size_t event_cap = 100000;
};

enum class ProbeOutcome : std::uint8_t { kCompleted, kHandshakeTimeout, kStalledSender, kTraceOverflow };

std::string_view to_string(ProbeOutcome o);

struct Arrival {
  Segment segment;
  Micros at{0};
};

// Bidirectional segment channel between the prober and a remote server.
//
// The simulator provides the only binding here. A live binding would inject
// segments through a raw socket, read them back from a packet capture, and
// keep the host stack from answering on the probe's port (host firewall).
class PacketPort {
 public:
  virtual ~PacketPort() = default;

  // Hands a prober segment to the network at now().
  virtual void send(const Segment& seg) = 0;

  // Next segment addressed to the prober, or nullopt once `deadline` passes
  // or nothing further can arrive.
  virtual std::optional<Arrival> receive(Micros deadline) = 0;

  // After the prober has closed: the next segment that was already on its way
  // to the prober, or nullopt when none remain. The remote endpoint is no
  // longer driven.
  virtual std::optional<Arrival> receive_in_flight() = 0;

  virtual Micros now() const = 0;
};

// Length of the stub HTTP request the prober sends ("GET / HTTP/1.0\r\n\r\n").
inline constexpr Bytes kRequestBytes = 18;

// Receiver-side state machine of one probe connection.
//
// Response data is acknowledged per ordinary receiver rules (cumulative ACK
// when the in-order point advances, one immediate duplicate ACK per arrival
// above a hole) except that the first arrival of every scripted packet is
// ignored and nothing past the ack-limit packet is acknowledged. All arrivals
// are recorded, dropped ones included.
class ProbeSession {
 public:
  explicit ProbeSession(ProbeScript script, std::size_t event_cap = ProbeLimits{}.event_cap);

  // The opening SYN.
  Segment open(Micros now);

  // Dispatches any arriving segment; returns what the prober sends in reply.
  std::vector<Segment> on_segment(const Segment& seg, Micros now);

  std::vector<Segment> on_data_segment(const Segment& seg, Micros now);

  // Records a segment that arrived after the prober closed.
  void record_late_arrival(const Segment& seg, Micros now);

  bool handshake_complete() const { return handshake_complete_; }
  bool closed() const { return closed_; }
  bool overflowed() const { return trace_.overflowed; }
  Bytes rcv_nxt() const { return rcv_nxt_; }
  int dupacks_sent() const { return dupacks_sent_; }
  std::uint64_t duplicate_delivery_anomalies() const { return duplicate_anomalies_; }
  const ProbeScript& script() const { return script_; }
  const ObservedTrace& trace() const { return trace_; }
  ObservedTrace take_trace() { return std::move(trace_); }

  // Distinct response bytes observed on the wire, including ignored ones.
  Bytes observed_bytes() const;

 private:
  Segment make_segment(std::uint8_t flags, Micros now);
  void record(Direction dir, const Segment& seg, Micros now);
  std::vector<Segment> finish(Micros now);

  ProbeScript script_;
  std::size_t event_cap_;
  ObservedTrace trace_;

  bool syn_sent_ = false;
  bool handshake_complete_ = false;
  bool closed_ = false;
  std::uint32_t ip_id_ = 0;
  Bytes request_end_ = 0;

  Bytes rcv_nxt_ = 0;
  Bytes last_ack_sent_ = 0;
  int dupacks_sent_ = 0;
  std::uint64_t duplicate_anomalies_ = 0;
  std::set<int> dropped_once_;
  std::map<Bytes, Bytes> delivered_;  // start -> end, disjoint, above rcv_nxt
  std::map<Bytes, Bytes> seen_;       // start -> end, disjoint
  std::map<std::uint32_t, std::pair<Bytes, Bytes>> seen_ids_;
};

struct ProbeResult {
  ObservedTrace trace;
  ProbeOutcome outcome = ProbeOutcome::kCompleted;
};

// Drives one ProbeSession over a port. Split into start/finish so a caller
// can set up the world between the SYN and the rest of the run.
class Prober {
 public:
  Prober(ProbeScript script, ProbeLimits limits);

  void start(PacketPort& port);
  ProbeOutcome finish(PacketPort& port);

  const ProbeSession& session() const { return session_; }
  ProbeSession& session() { return session_; }
  const ProbeLimits& limits() const { return limits_; }

 private:
  ProbeSession session_;
  ProbeLimits limits_;
  bool started_ = false;
};

ProbeResult run_probe(PacketPort& port, const ProbeScript& script, const ProbeLimits& limits = {});

}  // namespace ccprobe
