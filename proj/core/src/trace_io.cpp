#include "ccprobe/trace_io.hpp"

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include "json.hpp"

namespace ccprobe {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 7> kFieldNames = {"t_us", "dir", "kind", "seq",
                                                         "len",  "ack", "ip_id"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view name, const std::array<Enum, N>& values) {
  for (Enum v : values) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

constexpr std::array<Direction, 2> kDirections = {Direction::kTx, Direction::kRx};
constexpr std::array<EventKind, 6> kKinds = {EventKind::kSyn, EventKind::kSynAck, EventKind::kData,
                                             EventKind::kAck, EventKind::kRst,    EventKind::kFin};

std::int64_t integer_field(const ordered_json& obj, const char* key, std::size_t line) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw TraceParseError(line, std::string("field '") + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

std::string string_field(const ordered_json& obj, const char* key, std::size_t line) {
  const auto& v = obj.at(key);
  if (!v.is_string()) {
    throw TraceParseError(line, std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

TraceEvent parse_line(const std::string& text, std::size_t line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw TraceParseError(line, e.what());
  }
  if (!obj.is_object()) throw TraceParseError(line, "record is not an object");
  if (obj.size() != kFieldNames.size()) {
    throw TraceParseError(line, "record must have exactly the fields t_us,dir,kind,seq,len,ack,ip_id");
  }
  for (auto name : kFieldNames) {
    if (!obj.contains(std::string(name))) {
      throw TraceParseError(line, "missing field '" + std::string(name) + "'");
    }
  }

  TraceEvent ev;
  ev.t_us = integer_field(obj, "t_us", line);
  auto dir = lookup(string_field(obj, "dir", line), kDirections);
  if (!dir) throw TraceParseError(line, "unknown dir");
  ev.dir = *dir;
  auto kind = lookup(string_field(obj, "kind", line), kKinds);
  if (!kind) throw TraceParseError(line, "unknown kind");
  ev.kind = *kind;
  ev.seq = integer_field(obj, "seq", line);
  ev.len = integer_field(obj, "len", line);
  ev.ack = integer_field(obj, "ack", line);
  const std::int64_t id = integer_field(obj, "ip_id", line);
  if (id < 0 || id > static_cast<std::int64_t>(UINT32_MAX)) {
    throw TraceParseError(line, "ip_id out of range");
  }
  ev.ip_id = static_cast<std::uint32_t>(id);
  return ev;
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::kTx ? "tx" : "rx"; }

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kSyn:
      return "syn";
    case EventKind::kSynAck:
      return "synack";
    case EventKind::kData:
      return "data";
    case EventKind::kAck:
      return "ack";
    case EventKind::kRst:
      return "rst";
    case EventKind::kFin:
      return "fin";
  }
  return "?";
}

std::string_view to_string(PlotMarker m) { return m == PlotMarker::kPacket ? "packet" : "ack"; }

TraceParseError::TraceParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

std::string trace_violation(const ObservedTrace& trace) {
  std::int64_t last = 0;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& ev = trace.events[i];
    const std::string where = "event " + std::to_string(i + 1) + ": ";
    if (ev.t_us < 0) return where + "negative t_us";
    if (ev.t_us < last) return where + "events not sorted by t_us";
    if (ev.seq < 0 || ev.len < 0 || ev.ack < 0) return where + "negative seq/len/ack";
    if (ev.kind == EventKind::kData && ev.len <= 0) return where + "data event with len 0";
    if (ev.kind == EventKind::kAck && ev.len != 0) return where + "ack event with payload";
    last = ev.t_us;
  }
  return {};
}

void write_trace(const ObservedTrace& trace, std::ostream& sink) {
  for (const TraceEvent& ev : trace.events) {
    ordered_json obj;
    obj["t_us"] = ev.t_us;
    obj["dir"] = std::string(to_string(ev.dir));
    obj["kind"] = std::string(to_string(ev.kind));
    obj["seq"] = ev.seq;
    obj["len"] = ev.len;
    obj["ack"] = ev.ack;
    obj["ip_id"] = ev.ip_id;
    sink << obj.dump() << '\n';
  }
}

ObservedTrace read_trace(std::istream& source) {
  ObservedTrace trace;
  std::string text;
  std::size_t line = 0;
  while (std::getline(source, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    trace.events.push_back(parse_line(text, line));
  }
  if (auto why = trace_violation(trace); !why.empty()) throw TraceValidationError(why);
  return trace;
}

std::vector<PlotRow> emit_plot_points(const ObservedTrace& trace) {
  std::vector<PlotRow> rows;
  for (const TraceEvent& ev : trace.events) {
    if (ev.dir == Direction::kRx && ev.kind == EventKind::kData) {
      rows.push_back({ev.t_us, ev.seq + ev.len, PlotMarker::kPacket});
    } else if (ev.dir == Direction::kTx && ev.kind == EventKind::kAck) {
      rows.push_back({ev.t_us, ev.ack, PlotMarker::kAck});
    }
  }
  return rows;
}

void write_plot(const std::vector<PlotRow>& rows, std::ostream& sink) {
  sink << "t_us,y,marker\n";
  for (const PlotRow& r : rows) {
    sink << r.t_us << ',' << r.y << ',' << to_string(r.marker) << '\n';
  }
}

}  // namespace ccprobe
