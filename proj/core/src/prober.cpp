#include "ccprobe/prober.hpp"

#include <algorithm>
#include <iterator>
#include <string>
#include <utility>

namespace ccprobe {
namespace {

// Adds [start, end) to a set of disjoint intervals, coalescing neighbours.
void add_interval(std::map<Bytes, Bytes>& set, Bytes start, Bytes end) {
  if (end <= start) return;
  auto it = set.upper_bound(start);
  if (it != set.begin()) {
    auto prev = std::prev(it);
    if (prev->second >= start) {
      start = prev->first;
      end = std::max(end, prev->second);
      it = set.erase(prev);
    }
  }
  while (it != set.end() && it->first <= end) {
    end = std::max(end, it->second);
    it = set.erase(it);
  }
  set.emplace(start, end);
}

bool overlaps(Bytes a0, Bytes a1, Bytes b0, Bytes b1) { return a0 < b1 && b0 < a1; }

EventKind kind_of(const Segment& seg) {
  if (seg.has(kSyn)) return seg.has(kAck) ? EventKind::kSynAck : EventKind::kSyn;
  if (seg.has(kRst)) return EventKind::kRst;
  if (seg.has(kFin)) return EventKind::kFin;
  return seg.len > 0 ? EventKind::kData : EventKind::kAck;
}

}  // namespace

std::string_view to_string(ProbeOutcome o) {
  switch (o) {
    case ProbeOutcome::kCompleted:
      return "Completed";
    case ProbeOutcome::kHandshakeTimeout:
      return "HandshakeTimeout";
    case ProbeOutcome::kStalledSender:
      return "StalledSender";
    case ProbeOutcome::kTraceOverflow:
      return "TraceOverflow";
  }
  return "?";
}

void ProbeScript::validate() const {
  if (mss <= 0) throw ConfigError("probe mss must be positive");
  if (ack_limit_packet < 1) throw ConfigError("ack_limit_packet must be at least 1");
  if (!drop_packets.empty()) {
    if (*drop_packets.begin() < 1) throw ConfigError("drop packet indices start at 1");
    if (ack_limit_packet <= *drop_packets.rbegin()) {
      throw ConfigError("ack_limit_packet must exceed every dropped packet index");
    }
  }
}

ProbeSession::ProbeSession(ProbeScript script, std::size_t event_cap)
    : script_(std::move(script)), event_cap_(event_cap) {
  script_.validate();
}

void ProbeSession::record(Direction dir, const Segment& seg, Micros now) {
  if (trace_.overflowed) return;
  if (trace_.events.size() >= event_cap_) {
    trace_.overflowed = true;
    return;
  }
  trace_.events.push_back(
      TraceEvent{now.count(), dir, kind_of(seg), seg.seq, seg.len, seg.ack, seg.ip_id});
}

Segment ProbeSession::make_segment(std::uint8_t flags, Micros now) {
  Segment seg;
  seg.src = Role::kProber;
  seg.seq = request_end_;
  seg.ack = rcv_nxt_;
  seg.flags = flags;
  seg.ip_id = ++ip_id_;
  seg.sent_at = now;
  return seg;
}

Segment ProbeSession::open(Micros now) {
  Segment syn = make_segment(kSyn, now);
  syn.seq = 0;
  syn.ack = 0;
  syn.mss_option = script_.mss;
  syn_sent_ = true;
  record(Direction::kTx, syn, now);
  return syn;
}

std::vector<Segment> ProbeSession::on_segment(const Segment& seg, Micros now) {
  if (closed_) {
    record_late_arrival(seg, now);
    return {};
  }
  if (seg.has(kSyn) && seg.has(kAck)) {
    record(Direction::kRx, seg, now);
    if (!syn_sent_ || handshake_complete_) return {};
    handshake_complete_ = true;
    std::vector<Segment> out;
    Segment ack = make_segment(kAck, now);
    record(Direction::kTx, ack, now);
    out.push_back(ack);
    Segment request = make_segment(kAck, now);
    request.len = kRequestBytes;
    request_end_ = request.end();
    record(Direction::kTx, request, now);
    out.push_back(request);
    return out;
  }
  if (seg.is_payload() && handshake_complete_ && !seg.has(kSyn)) {
    return on_data_segment(seg, now);
  }
  record(Direction::kRx, seg, now);
  return {};
}

std::vector<Segment> ProbeSession::on_data_segment(const Segment& seg, Micros now) {
  record(Direction::kRx, seg, now);

  // A second copy of the same IP datagram is link duplication, not a
  // retransmission.
  if (auto it = seen_ids_.find(seg.ip_id); it != seen_ids_.end()) {
    if (overlaps(it->second.first, it->second.second, seg.seq, seg.end())) {
      ++duplicate_anomalies_;
      return {};
    }
  }
  seen_ids_[seg.ip_id] = {seg.seq, seg.end()};
  add_interval(seen_, seg.seq, seg.end());

  const int index = script_.packet_index(seg.seq);
  if (script_.drop_packets.contains(index) && !dropped_once_.contains(index)) {
    dropped_once_.insert(index);
    return {};
  }
  if (seg.seq >= script_.ack_limit_bytes()) return {};

  const Bytes before = rcv_nxt_;
  add_interval(delivered_, std::max(seg.seq, rcv_nxt_), seg.end());
  while (!delivered_.empty() && delivered_.begin()->first <= rcv_nxt_) {
    rcv_nxt_ = std::max(rcv_nxt_, delivered_.begin()->second);
    delivered_.erase(delivered_.begin());
  }

  std::vector<Segment> out;
  if (rcv_nxt_ > before) {
    Segment ack = make_segment(kAck, now);
    record(Direction::kTx, ack, now);
    last_ack_sent_ = ack.ack;
    out.push_back(ack);
  } else if (seg.seq > rcv_nxt_ && script_.dupack_per_arrival) {
    Segment dup = make_segment(kAck, now);
    record(Direction::kTx, dup, now);
    ++dupacks_sent_;
    out.push_back(dup);
  }

  if (rcv_nxt_ >= script_.ack_limit_bytes()) {
    auto tail = finish(now);
    out.insert(out.end(), tail.begin(), tail.end());
  }
  return out;
}

std::vector<Segment> ProbeSession::finish(Micros now) {
  closed_ = true;
  Segment close = make_segment(script_.close_mode == CloseMode::kReset ? kRst : (kFin | kAck), now);
  record(Direction::kTx, close, now);
  return {close};
}

void ProbeSession::record_late_arrival(const Segment& seg, Micros now) {
  record(Direction::kRx, seg, now);
  if (seg.is_payload()) add_interval(seen_, seg.seq, seg.end());
}

Bytes ProbeSession::observed_bytes() const {
  Bytes total = 0;
  for (const auto& [start, end] : seen_) total += end - start;
  return total;
}

Prober::Prober(ProbeScript script, ProbeLimits limits)
    : session_(std::move(script), limits.event_cap), limits_(limits) {}

void Prober::start(PacketPort& port) {
  if (started_) return;
  started_ = true;
  port.send(session_.open(port.now()));
}

ProbeOutcome Prober::finish(PacketPort& port) {
  start(port);
  while (!session_.closed()) {
    if (session_.overflowed()) return ProbeOutcome::kTraceOverflow;
    auto arrival = port.receive(limits_.deadline);
    if (!arrival) {
      return session_.handshake_complete() ? ProbeOutcome::kStalledSender
                                           : ProbeOutcome::kHandshakeTimeout;
    }
    for (const Segment& reply : session_.on_segment(arrival->segment, arrival->at)) {
      port.send(reply);
    }
  }
  while (auto late = port.receive_in_flight()) {
    session_.record_late_arrival(late->segment, late->at);
  }
  return session_.overflowed() ? ProbeOutcome::kTraceOverflow : ProbeOutcome::kCompleted;
}

ProbeResult run_probe(PacketPort& port, const ProbeScript& script, const ProbeLimits& limits) {
  Prober prober(script, limits);
  ProbeResult result;
  result.outcome = prober.finish(port);
  result.trace = prober.session().take_trace();
  return result;
}

}  // namespace ccprobe
