#include "ccprobe/segment.hpp"

#include <sstream>

namespace ccprobe {

std::string segment_violation(const Segment& seg) {
  if (seg.len < 0) return "negative length";
  if (seg.seq < 0 || seg.ack < 0) return "negative sequence or ack";
  if (seg.has(kSyn) && seg.has(kRst)) return "SYN and RST are mutually exclusive";
  if (seg.mss_option && !seg.has(kSyn)) return "MSS option on a non-SYN segment";
  if (seg.mss_option && *seg.mss_option <= 0) return "non-positive MSS option";
  return {};
}

std::string describe(const Segment& seg) {
  std::ostringstream out;
  out << (seg.src == Role::kServer ? "server" : "prober") << " [";
  const char* sep = "";
  for (auto [f, name] : {std::pair{kSyn, "SYN"}, {kAck, "ACK"}, {kFin, "FIN"}, {kRst, "RST"}}) {
    if (seg.has(f)) {
      out << sep << name;
      sep = "|";
    }
  }
  out << "] seq=" << seg.seq << " len=" << seg.len << " ack=" << seg.ack << " id=" << seg.ip_id;
  if (seg.mss_option) out << " mss=" << *seg.mss_option;
  return out.str();
}

}  // namespace ccprobe
