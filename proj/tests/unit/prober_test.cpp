#include "ccprobe/prober.hpp"

#include <gtest/gtest.h>

#include <deque>
#include <functional>
#include <random>

namespace ccprobe {
namespace {

constexpr Bytes kMss = 100;

Segment syn_ack(std::uint32_t ip_id = 1, Bytes mss = kMss) {
  Segment s;
  s.flags = kSyn | kAck;
  s.mss_option = mss;
  s.ip_id = ip_id;
  return s;
}

// Packet `index` (1-based) of the response, carried by a fresh datagram.
Segment data_packet(int index, std::uint32_t ip_id, Bytes mss = kMss) {
  Segment s;
  s.flags = kAck;
  s.seq = (index - 1) * mss;
  s.len = mss;
  s.ack = kRequestBytes;
  s.ip_id = ip_id;
  return s;
}

ProbeSession handshaken_session(ProbeScript script = {}) {
  ProbeSession session(std::move(script));
  session.open(Micros{0});
  session.on_segment(syn_ack(), from_ms(100));
  return session;
}

std::vector<Bytes> ack_values(const std::vector<Segment>& segs) {
  std::vector<Bytes> out;
  for (const Segment& s : segs) out.push_back(s.ack);
  return out;
}

// Serves a fixed list of arrivals; optionally reacts to each send.
class ScriptedPort final : public PacketPort {
 public:
  std::deque<Arrival> pending;
  std::vector<Segment> sent;
  std::deque<Arrival> in_flight_after_close;
  std::function<void(const Segment&, ScriptedPort&)> on_send;

  void send(const Segment& seg) override {
    sent.push_back(seg);
    if (on_send) on_send(seg, *this);
  }
  std::optional<Arrival> receive(Micros deadline) override {
    if (pending.empty() || pending.front().at > deadline) {
      clock_ = std::max(clock_, deadline);
      return std::nullopt;
    }
    Arrival a = pending.front();
    pending.pop_front();
    clock_ = a.at;
    return a;
  }
  std::optional<Arrival> receive_in_flight() override {
    if (in_flight_after_close.empty()) return std::nullopt;
    Arrival a = in_flight_after_close.front();
    in_flight_after_close.pop_front();
    return a;
  }
  Micros now() const override { return clock_; }

 private:
  Micros clock_{0};
};

// ---------------------------------------------------------------------------

TEST(ProbeScript, Validation) {
  ProbeScript s;
  EXPECT_NO_THROW(s.validate());
  s.mss = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.ack_limit_packet = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.drop_packets = {0};
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.ack_limit_packet = 16;
  EXPECT_THROW(s.validate(), ConfigError);
  s.ack_limit_packet = 17;
  EXPECT_NO_THROW(s.validate());
}

TEST(ProbeScript, PacketIndexing) {
  ProbeScript s;
  EXPECT_EQ(s.packet_index(0), 1);
  EXPECT_EQ(s.packet_index(1200), 13);
  EXPECT_EQ(s.packet_index(1299), 13);
  EXPECT_EQ(s.packet_start(16), 1500);
  EXPECT_EQ(s.ack_limit_bytes(), 2500);
}

TEST(ProbeSession, OpenSendsSynWithMss) {
  ProbeSession session{ProbeScript{}};
  Segment syn = session.open(Micros{0});
  EXPECT_TRUE(syn.has(kSyn));
  EXPECT_FALSE(syn.has(kAck));
  ASSERT_TRUE(syn.mss_option);
  EXPECT_EQ(*syn.mss_option, 100);
  EXPECT_EQ(syn.ip_id, 1u);
  ASSERT_EQ(session.trace().events.size(), 1u);
  EXPECT_EQ(session.trace().events[0].kind, EventKind::kSyn);
  EXPECT_EQ(session.trace().events[0].dir, Direction::kTx);
}

TEST(ProbeSession, LargeMssIsOfferedAsIs) {
  ProbeScript script;
  script.mss = 1460;
  ProbeSession session(script);
  EXPECT_EQ(session.open(Micros{0}).mss_option, 1460);
}

TEST(ProbeSession, SynAckTriggersAckAndRequest) {
  ProbeSession session{ProbeScript{}};
  session.open(Micros{0});
  auto out = session.on_segment(syn_ack(), from_ms(100));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].has(kAck));
  EXPECT_EQ(out[0].len, 0);
  EXPECT_EQ(out[1].seq, 0);
  EXPECT_EQ(out[1].len, kRequestBytes);
  EXPECT_TRUE(session.handshake_complete());

  std::vector<EventKind> kinds;
  for (const TraceEvent& ev : session.trace().events) kinds.push_back(ev.kind);
  EXPECT_EQ(kinds, (std::vector<EventKind>{EventKind::kSyn, EventKind::kSynAck, EventKind::kAck, EventKind::kData}));
}

TEST(ProbeSession, RepeatedSynAckIsRecordedOnly) {
  ProbeSession session = handshaken_session();
  EXPECT_TRUE(session.on_segment(syn_ack(2), from_ms(200)).empty());
  EXPECT_EQ(session.trace().events.back().kind, EventKind::kSynAck);
}

TEST(ProbeSession, DataBeforeHandshakeIsIgnored) {
  ProbeSession session{ProbeScript{}};
  session.open(Micros{0});
  EXPECT_TRUE(session.on_segment(data_packet(1, 1), from_ms(50)).empty());
  EXPECT_EQ(session.rcv_nxt(), 0);
}

TEST(ProbeSession, InOrderDataIsAcked) {
  ProbeSession session = handshaken_session();
  auto out = session.on_segment(data_packet(1, 2), from_ms(200));
  EXPECT_EQ(ack_values(out), (std::vector<Bytes>{100}));
  EXPECT_EQ(session.rcv_nxt(), 100);
}

TEST(ProbeSession, DropOfThirteenThenRepair) {
  ProbeSession session = handshaken_session();
  std::uint32_t id = 2;
  for (int i = 1; i <= 12; ++i) session.on_segment(data_packet(i, id++), from_ms(200 + i));
  ASSERT_EQ(session.rcv_nxt(), 1200);

  EXPECT_TRUE(session.on_segment(data_packet(13, id++), from_ms(300)).empty());
  EXPECT_EQ(ack_values(session.on_segment(data_packet(14, id++), from_ms(301))), (std::vector<Bytes>{1200}));
  EXPECT_EQ(ack_values(session.on_segment(data_packet(15, id++), from_ms(302))), (std::vector<Bytes>{1200}));
  EXPECT_EQ(session.dupacks_sent(), 2);

  // Retransmission of 13 fills the hole up to 15.
  EXPECT_EQ(ack_values(session.on_segment(data_packet(13, id++), from_ms(400))), (std::vector<Bytes>{1500}));
}

TEST(ProbeSession, EachScriptedPacketIsDroppedOnlyOnce) {
  ProbeSession session = handshaken_session();
  std::uint32_t id = 2;
  for (int i = 1; i <= 15; ++i) session.on_segment(data_packet(i, id++), from_ms(200));
  session.on_segment(data_packet(13, id++), from_ms(300));
  ASSERT_EQ(session.rcv_nxt(), 1500);
  EXPECT_TRUE(session.on_segment(data_packet(16, id++), from_ms(301)).empty());
  EXPECT_EQ(ack_values(session.on_segment(data_packet(16, id++), from_ms(400))), (std::vector<Bytes>{1600}));
}

TEST(ProbeSession, DuplicateDatagramIsAnAnomaly) {
  ProbeSession session = handshaken_session();
  session.on_segment(data_packet(1, 7), from_ms(200));
  EXPECT_TRUE(session.on_segment(data_packet(1, 7), from_ms(201)).empty());
  EXPECT_EQ(session.duplicate_delivery_anomalies(), 1u);
  // A genuine retransmission below rcv_nxt is not an anomaly, and gets no ACK.
  EXPECT_TRUE(session.on_segment(data_packet(1, 8), from_ms(202)).empty());
  EXPECT_EQ(session.duplicate_delivery_anomalies(), 1u);
}

TEST(ProbeSession, NothingPastAckLimitIsAcked) {
  ProbeScript script;
  script.drop_packets.clear();
  ProbeSession session = handshaken_session(script);
  std::uint32_t id = 2;
  for (int i = 1; i <= 24; ++i) session.on_segment(data_packet(i, id++), from_ms(200));
  EXPECT_TRUE(session.on_segment(data_packet(26, id++), from_ms(201)).empty());
  EXPECT_TRUE(session.on_segment(data_packet(27, id++), from_ms(202)).empty());
  EXPECT_EQ(session.rcv_nxt(), 2400);
  EXPECT_FALSE(session.closed());
}

TEST(ProbeSession, ResetAfterAckLimit) {
  ProbeSession session = handshaken_session();
  std::uint32_t id = 2;
  std::vector<Segment> all;
  auto feed = [&](int index) {
    auto out = session.on_segment(data_packet(index, id++), from_ms(200));
    all.insert(all.end(), out.begin(), out.end());
  };
  for (int i = 1; i <= 25; ++i) feed(i);
  feed(13);
  feed(16);
  ASSERT_TRUE(session.closed());
  EXPECT_EQ(session.rcv_nxt(), 2500);
  int resets = 0;
  for (const Segment& s : all) resets += s.has(kRst) ? 1 : 0;
  EXPECT_EQ(resets, 1);
  EXPECT_TRUE(all.back().has(kRst));
  EXPECT_EQ(all.back().ack, 2500);

  // Late arrivals are recorded without reply.
  const auto before = session.trace().events.size();
  EXPECT_TRUE(session.on_segment(data_packet(26, id++), from_ms(300)).empty());
  EXPECT_EQ(session.trace().events.size(), before + 1);
}

TEST(ProbeSession, FinCloseMode) {
  ProbeScript script;
  script.drop_packets.clear();
  script.ack_limit_packet = 2;
  script.close_mode = CloseMode::kFin;
  ProbeSession session = handshaken_session(script);
  session.on_segment(data_packet(1, 2), from_ms(200));
  auto out = session.on_segment(data_packet(2, 3), from_ms(200));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[1].has(kFin));
  EXPECT_TRUE(out[1].has(kAck));
  EXPECT_EQ(session.trace().events.back().kind, EventKind::kFin);
}

TEST(ProbeSession, EventCapStopsRecording) {
  ProbeSession session(ProbeScript{}, 3);
  session.open(Micros{0});
  session.on_segment(syn_ack(), from_ms(100));
  EXPECT_TRUE(session.overflowed());
  EXPECT_EQ(session.trace().events.size(), 3u);
  EXPECT_TRUE(session.trace().overflowed);
}

TEST(ProbeSession, ObservedBytesCountDroppedArrivals) {
  ProbeSession session = handshaken_session();
  for (int i = 1; i <= 13; ++i) session.on_segment(data_packet(i, static_cast<std::uint32_t>(i + 1)), from_ms(200));
  EXPECT_EQ(session.observed_bytes(), 1300);
  EXPECT_EQ(session.rcv_nxt(), 1200);
}

// Any arrival order: ACK values never decrease, duplicates carry rcv_nxt, and
// at most one close goes out, as the last transmission.
TEST(ProbeSession, AckStreamPropertiesUnderRandomArrivals) {
  for (std::uint32_t seed = 1; seed <= 300; ++seed) {
    std::mt19937 rng(seed);
    ProbeSession session = handshaken_session();
    std::uint32_t id = 2;
    std::vector<Segment> sent;
    Bytes last_ack = 0;
    for (int step = 0; step < 80 && !session.closed(); ++step) {
      const int index = std::uniform_int_distribution<int>(1, 30)(rng);
      const Bytes rcv_before = session.rcv_nxt();
      auto out = session.on_segment(data_packet(index, id++), from_ms(200 + step));
      for (const Segment& s : out) {
        ASSERT_GE(s.ack, last_ack) << "seed " << seed;
        last_ack = s.ack;
        if (!s.has(kRst)) ASSERT_EQ(s.ack, session.rcv_nxt());
      }
      if (session.rcv_nxt() == rcv_before && !out.empty()) {
        ASSERT_EQ(out.size(), 1u);
        ASSERT_GT((index - 1) * kMss, rcv_before);  // dupack only above the hole
        ASSERT_LE(index, 25);
      }
      sent.insert(sent.end(), out.begin(), out.end());
    }
    int closes = 0;
    for (const Segment& s : sent) closes += s.has(kRst) ? 1 : 0;
    ASSERT_LE(closes, 1);
    if (closes == 1) ASSERT_TRUE(sent.back().has(kRst));
    ASSERT_LE(session.rcv_nxt(), 2500);
  }
}

// ---------------------------------------------------------------------------

TEST(Prober, HandshakeTimeout) {
  ScriptedPort port;
  ProbeResult r = run_probe(port, ProbeScript{});
  EXPECT_EQ(r.outcome, ProbeOutcome::kHandshakeTimeout);
  ASSERT_EQ(port.sent.size(), 1u);
  EXPECT_TRUE(port.sent[0].has(kSyn));
}

TEST(Prober, StalledSender) {
  ScriptedPort port;
  port.pending.push_back({syn_ack(), from_ms(100)});
  ProbeResult r = run_probe(port, ProbeScript{});
  EXPECT_EQ(r.outcome, ProbeOutcome::kStalledSender);
  EXPECT_EQ(port.sent.size(), 3u);
}

TEST(Prober, ArrivalsAfterDeadlineAreNotRead) {
  ScriptedPort port;
  port.pending.push_back({syn_ack(), from_ms(100)});
  ProbeLimits limits;
  limits.deadline = from_ms(50);
  EXPECT_EQ(run_probe(port, ProbeScript{}, limits).outcome, ProbeOutcome::kHandshakeTimeout);
}

TEST(Prober, OverflowAtEventCap) {
  ScriptedPort port;
  port.pending.push_back({syn_ack(), from_ms(100)});
  for (int i = 1; i <= 30; ++i) port.pending.push_back({data_packet(i, static_cast<std::uint32_t>(i + 1)), from_ms(200)});
  ProbeLimits limits;
  limits.event_cap = 10;
  ProbeResult r = run_probe(port, ProbeScript{}, limits);
  EXPECT_EQ(r.outcome, ProbeOutcome::kTraceOverflow);
  EXPECT_TRUE(r.trace.overflowed);
  EXPECT_EQ(r.trace.events.size(), 10u);
}

TEST(Prober, CompletesAndDrainsInFlight) {
  ScriptedPort port;
  port.pending.push_back({syn_ack(), from_ms(100)});
  std::uint32_t id = 2;
  for (int i = 1; i <= 25; ++i) port.pending.push_back({data_packet(i, id++), from_ms(200)});
  port.pending.push_back({data_packet(13, id++), from_ms(300)});
  port.pending.push_back({data_packet(16, id++), from_ms(400)});
  port.pending.push_back({data_packet(30, id++), from_ms(450)});  // never read through receive()
  port.in_flight_after_close.push_back({data_packet(17, id++), from_ms(450)});

  ProbeResult r = run_probe(port, ProbeScript{});
  EXPECT_EQ(r.outcome, ProbeOutcome::kCompleted);
  EXPECT_TRUE(port.sent.back().has(kRst));
  const TraceEvent& last = r.trace.events.back();
  EXPECT_EQ(last.dir, Direction::kRx);
  EXPECT_EQ(last.seq, 1600);
  EXPECT_EQ(trace_violation(r.trace), "");
}

TEST(Prober, MssPassThroughToSegmentation) {
  ProbeScript script;
  script.mss = 1460;
  ScriptedPort port;
  port.pending.push_back({syn_ack(1, 1460), from_ms(100)});
  port.pending.push_back({data_packet(1, 2, 1460), from_ms(200)});
  run_probe(port, script);
  ASSERT_TRUE(port.sent[0].mss_option);
  EXPECT_EQ(*port.sent[0].mss_option, 1460);
  EXPECT_EQ(port.sent.back().ack, 1460);
}

}  // namespace
}  // namespace ccprobe
