#include "ccprobe/trace_io.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "ccprobe/netsim.hpp"

namespace ccprobe {
namespace {

std::string to_text(const ObservedTrace& t) {
  std::ostringstream out;
  write_trace(t, out);
  return out.str();
}

ObservedTrace from_text(const std::string& text) {
  std::istringstream in(text);
  return read_trace(in);
}

ObservedTrace sim_trace(Variant v) {
  Scenario s;
  s.variant = v;
  return simulate(s).trace;
}

TEST(WriteTrace, EmptyTraceIsEmptyFile) {
  EXPECT_EQ(to_text(ObservedTrace{}), "");
  EXPECT_TRUE(from_text("").events.empty());
}

TEST(WriteTrace, SingleSynLine) {
  ObservedTrace t;
  t.events.push_back({0, Direction::kTx, EventKind::kSyn, 0, 0, 0, 1});
  EXPECT_EQ(to_text(t), "{\"t_us\":0,\"dir\":\"tx\",\"kind\":\"syn\",\"seq\":0,\"len\":0,\"ack\":0,\"ip_id\":1}\n");
}

TEST(ReadTrace, RoundTripsSimulatedTraces) {
  for (Variant v : kAllVariants) {
    ObservedTrace t = sim_trace(v);
    ASSERT_FALSE(t.events.empty());
    EXPECT_EQ(from_text(to_text(t)), t) << to_string(v);
    EXPECT_EQ(to_text(from_text(to_text(t))), to_text(t));
  }
}

TEST(ReadTrace, ToleratesBlankLinesAndCrlf) {
  std::string text =
      "\n{\"t_us\":0,\"dir\":\"tx\",\"kind\":\"syn\",\"seq\":0,\"len\":0,\"ack\":0,\"ip_id\":1}\r\n  \n";
  ObservedTrace t = from_text(text);
  ASSERT_EQ(t.events.size(), 1u);
  EXPECT_EQ(t.events[0].kind, EventKind::kSyn);
}

TEST(ReadTrace, KeyOrderIsNotSignificant) {
  ObservedTrace t = from_text("{\"ip_id\":1,\"ack\":0,\"len\":0,\"seq\":0,\"kind\":\"syn\",\"dir\":\"tx\",\"t_us\":5}\n");
  EXPECT_EQ(t.events.at(0).t_us, 5);
}

void expect_parse_error_at(const std::string& text, std::size_t line) {
  try {
    from_text(text);
    FAIL() << "no error for: " << text;
  } catch (const TraceParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
  }
}

TEST(ReadTrace, ParseErrorsCarryLineNumbers) {
  const std::string good = "{\"t_us\":0,\"dir\":\"tx\",\"kind\":\"syn\",\"seq\":0,\"len\":0,\"ack\":0,\"ip_id\":1}\n";
  expect_parse_error_at(good + "not json\n", 2);
  expect_parse_error_at(good + good + "{\"t_us\":1}\n", 3);
  expect_parse_error_at("[1,2]\n", 1);
  expect_parse_error_at("{\"t_us\":\"0\",\"dir\":\"tx\",\"kind\":\"syn\",\"seq\":0,\"len\":0,\"ack\":0,\"ip_id\":1}\n", 1);
  expect_parse_error_at("{\"t_us\":0,\"dir\":\"up\",\"kind\":\"syn\",\"seq\":0,\"len\":0,\"ack\":0,\"ip_id\":1}\n", 1);
  expect_parse_error_at("{\"t_us\":0,\"dir\":\"tx\",\"kind\":\"syn\",\"seq\":0,\"len\":0,\"ack\":0,\"ip_id\":1,\"x\":0}\n",
                        1);
  expect_parse_error_at("{\"t_us\":0,\"dir\":\"tx\",\"kind\":\"syn\",\"seq\":0,\"len\":0,\"ack\":0,\"ip_id\":-1}\n", 1);
  expect_parse_error_at("\n\n{\"t_us\":0.5,\"dir\":\"tx\",\"kind\":\"syn\",\"seq\":0,\"len\":0,\"ack\":0,\"ip_id\":1}\n",
                        3);
}

TEST(ReadTrace, UnsortedTraceIsInvalid) {
  ObservedTrace t;
  t.events.push_back({10, Direction::kTx, EventKind::kSyn, 0, 0, 0, 1});
  t.events.push_back({5, Direction::kRx, EventKind::kSynAck, 0, 0, 0, 1});
  EXPECT_NE(trace_violation(t), "");
  EXPECT_THROW(from_text(to_text(t)), TraceValidationError);
}

TEST(TraceViolation, StructuralRules) {
  ObservedTrace t;
  t.events.push_back({0, Direction::kRx, EventKind::kData, 0, 0, 0, 1});
  EXPECT_NE(trace_violation(t), "");
  t.events[0] = {0, Direction::kTx, EventKind::kAck, 0, 5, 0, 1};
  EXPECT_NE(trace_violation(t), "");
  t.events[0] = {-1, Direction::kTx, EventKind::kSyn, 0, 0, 0, 1};
  EXPECT_NE(trace_violation(t), "");
  t.events[0] = {0, Direction::kTx, EventKind::kAck, 0, 0, 100, 1};
  EXPECT_EQ(trace_violation(t), "");
}

// ---------------------------------------------------------------------------

TEST(PlotPoints, DataAndAckRows) {
  ObservedTrace t;
  t.events.push_back({0, Direction::kTx, EventKind::kSyn, 0, 0, 0, 1});
  t.events.push_back({100000, Direction::kRx, EventKind::kSynAck, 0, 0, 0, 1});
  t.events.push_back({200000, Direction::kRx, EventKind::kData, 0, 100, 18, 2});
  t.events.push_back({200000, Direction::kTx, EventKind::kAck, 18, 0, 100, 4});
  const auto rows = emit_plot_points(t);
  EXPECT_EQ(rows, (std::vector<PlotRow>{{200000, 100, PlotMarker::kPacket}, {200000, 100, PlotMarker::kAck}}));

  std::ostringstream csv;
  write_plot(rows, csv);
  EXPECT_EQ(csv.str(), "t_us,y,marker\n200000,100,packet\n200000,100,ack\n");
}

TEST(PlotPoints, EmptyTraceHasHeaderOnly) {
  std::ostringstream csv;
  write_plot(emit_plot_points(ObservedTrace{}), csv);
  EXPECT_EQ(csv.str(), "t_us,y,marker\n");
}

TEST(PlotPoints, RowCountMatchesDataAndAcks) {
  for (Variant v : kAllVariants) {
    ObservedTrace t = sim_trace(v);
    std::size_t expected = 0;
    for (const TraceEvent& ev : t.events) {
      expected += (ev.dir == Direction::kRx && ev.kind == EventKind::kData) ||
                  (ev.dir == Direction::kTx && ev.kind == EventKind::kAck);
    }
    EXPECT_EQ(emit_plot_points(t).size(), expected) << to_string(v);
  }
}

TEST(PlotPoints, TahoeShowsSeventeenTwice) {
  const auto rows = emit_plot_points(sim_trace(Variant::kTahoe));
  int packet17 = 0;
  for (const PlotRow& r : rows) packet17 += (r.marker == PlotMarker::kPacket && r.y == 1700) ? 1 : 0;
  EXPECT_EQ(packet17, 2);
}

}  // namespace
}  // namespace ccprobe
