#include "ccprobe/classifier.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace ccprobe {
namespace {

bool is_rx_data(const TraceEvent& ev) { return ev.dir == Direction::kRx && ev.kind == EventKind::kData; }

bool overlaps(const TraceEvent& a, const TraceEvent& b) {
  return a.seq < b.seq + b.len && b.seq < a.seq + a.len;
}

bool prober_closed(const ObservedTrace& trace) {
  return std::any_of(trace.events.begin(), trace.events.end(), [](const TraceEvent& ev) {
    return ev.dir == Direction::kTx && (ev.kind == EventKind::kRst || ev.kind == EventKind::kFin);
  });
}

ClassificationReport error_report(ClassifyError e, FeatureVector features, std::string note) {
  ClassificationReport r;
  r.outcome = e;
  r.features = features;
  r.evidence.push_back({std::nullopt, std::move(note)});
  return r;
}

}  // namespace

std::string_view to_string(RetxKind k) {
  switch (k) {
    case RetxKind::kNone:
      return "none";
    case RetxKind::kFast:
      return "fast";
    case RetxKind::kTimeout:
      return "timeout";
  }
  return "?";
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::kNewReno:
      return "NewReno";
    case Label::kReno:
      return "Reno";
    case Label::kTahoe:
      return "Tahoe";
    case Label::kNoFastRetransmit:
      return "NoFastRetransmit";
    case Label::kRenoPlus:
      return "RenoPlus";
    case Label::kUnclassifiable:
      return "Unclassifiable";
  }
  return "?";
}

std::string_view to_string(ClassifyError e) {
  switch (e) {
    case ClassifyError::kReordering:
      return "Reordering";
    case ClassifyError::kTraceOverflow:
      return "TraceOverflow";
    case ClassifyError::kIncomplete:
      return "Incomplete";
  }
  return "?";
}

Label expected_label(Variant v) {
  switch (v) {
    case Variant::kTahoe:
      return Label::kTahoe;
    case Variant::kReno:
      return Label::kReno;
    case Variant::kNewReno:
      return Label::kNewReno;
    case Variant::kNoFastRetransmit:
      return Label::kNoFastRetransmit;
    case Variant::kRenoPlus:
      return Label::kRenoPlus;
  }
  return Label::kUnclassifiable;
}

std::optional<Label> ClassificationReport::label() const {
  if (auto* l = std::get_if<Label>(&outcome)) return *l;
  return std::nullopt;
}

std::optional<ClassifyError> ClassificationReport::error() const {
  if (auto* e = std::get_if<ClassifyError>(&outcome)) return *e;
  return std::nullopt;
}

std::optional<Micros> estimate_rtt(const ObservedTrace& trace) {
  auto first_after = [&](std::size_t from, auto pred) -> std::optional<std::size_t> {
    for (std::size_t i = from; i < trace.events.size(); ++i) {
      if (pred(trace.events[i])) return i;
    }
    return std::nullopt;
  };
  auto gap = [&](std::optional<std::size_t> a, std::optional<std::size_t> b) -> std::optional<Micros> {
    if (!a || !b) return std::nullopt;
    const std::int64_t d = trace.events[*b].t_us - trace.events[*a].t_us;
    if (d <= 0) return std::nullopt;
    return Micros{d};
  };

  auto syn = first_after(0, [](const TraceEvent& ev) {
    return ev.dir == Direction::kTx && ev.kind == EventKind::kSyn;
  });
  if (syn) {
    auto synack = first_after(*syn + 1, [](const TraceEvent& ev) {
      return ev.dir == Direction::kRx && ev.kind == EventKind::kSynAck;
    });
    if (auto rtt = gap(syn, synack)) return rtt;
  }

  auto request = first_after(0, [](const TraceEvent& ev) {
    return ev.dir == Direction::kTx && ev.kind == EventKind::kData;
  });
  if (!request) return std::nullopt;
  auto data = first_after(*request + 1, is_rx_data);
  return gap(request, data);
}

std::vector<Retransmission> detect_retransmissions(const ObservedTrace& trace, Micros rtt_est, Bytes mss,
                                                   double timeout_factor) {
  std::vector<Retransmission> out;
  const double threshold_us = timeout_factor * static_cast<double>(rtt_est.count());
  std::vector<std::size_t> earlier;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& ev = trace.events[i];
    if (!is_rx_data(ev)) continue;
    const bool retransmitted = std::any_of(earlier.begin(), earlier.end(), [&](std::size_t j) {
      const TraceEvent& prev = trace.events[j];
      return overlaps(prev, ev) && prev.ip_id < ev.ip_id;
    });
    if (retransmitted) {
      const Micros gap{ev.t_us - trace.events[earlier.back()].t_us};
      Retransmission r;
      r.packet_index = static_cast<int>(ev.seq / mss) + 1;
      r.arrival = Micros{ev.t_us};
      r.gap = gap;
      r.kind = static_cast<double>(gap.count()) > threshold_us ? RetxKind::kTimeout : RetxKind::kFast;
      r.event = i;
      out.push_back(r);
    }
    earlier.push_back(i);
  }
  return out;
}

bool detect_reordering(const ObservedTrace& trace) {
  std::vector<const TraceEvent*> earlier;
  for (const TraceEvent& ev : trace.events) {
    if (!is_rx_data(ev)) continue;
    for (const TraceEvent* prev : earlier) {
      if (prev->ip_id > ev.ip_id && !overlaps(*prev, ev)) return true;
    }
    earlier.push_back(&ev);
  }
  return false;
}

ClassificationReport classify(const FeatureVector& f) {
  ClassificationReport r;
  r.features = f;
  if (f.reordering_detected) {
    r.outcome = ClassifyError::kReordering;
  } else if (f.retx13 == RetxKind::kTimeout) {
    r.outcome = Label::kNoFastRetransmit;
  } else if (f.retx13 == RetxKind::kNone) {
    r.outcome = Label::kUnclassifiable;
  } else if (f.extra_retx_between_13_and_16) {
    r.outcome = Label::kRenoPlus;
  } else if (f.unnecessary_retx17) {
    r.outcome = Label::kTahoe;
  } else if (f.retx16 == RetxKind::kTimeout) {
    r.outcome = Label::kReno;
  } else if (f.retx16 == RetxKind::kFast && f.retransmission_count == 2) {
    r.outcome = Label::kNewReno;
  } else {
    r.outcome = Label::kUnclassifiable;
  }
  return r;
}

ClassificationReport classify_trace(const ObservedTrace& trace, const ProbeScript& script,
                                    const ClassifierConfig& config) {
  FeatureVector f;
  if (trace.overflowed || (config.event_cap && trace.events.size() >= *config.event_cap)) {
    return error_report(ClassifyError::kTraceOverflow, f, "trace reached the event cap");
  }
  auto rtt = estimate_rtt(trace);
  if (!rtt) return error_report(ClassifyError::kIncomplete, f, "no handshake or request/response exchange");
  f.rtt_est = *rtt;

  if (detect_reordering(trace)) {
    f.reordering_detected = true;
    return error_report(ClassifyError::kReordering, f, "data arrived out of ip_id order");
  }
  if (!prober_closed(trace)) {
    return error_report(ClassifyError::kIncomplete, f, "trace ends before the prober closed");
  }

  const auto retx = detect_retransmissions(trace, *rtt, script.mss, config.timeout_factor);
  const std::vector<int> drops(script.drop_packets.begin(), script.drop_packets.end());
  const std::optional<int> first = drops.empty() ? std::nullopt : std::optional<int>(drops[0]);
  const std::optional<int> second = drops.size() < 2 ? std::nullopt : std::optional<int>(drops[1]);

  auto first_retx = [&](std::optional<int> index) -> const Retransmission* {
    if (!index) return nullptr;
    for (const auto& r : retx) {
      if (r.packet_index == *index) return &r;
    }
    return nullptr;
  };
  const Retransmission* r13 = first_retx(first);
  const Retransmission* r16 = r13 ? first_retx(second) : nullptr;
  f.retx13 = r13 ? r13->kind : RetxKind::kNone;
  f.retx16 = r16 ? r16->kind : RetxKind::kNone;

  if (second) {
    const int after = *second + 1;
    const Bytes covered = after * script.mss;
    for (const auto& r : retx) {
      if (r.packet_index != after) continue;
      const bool acked_before = std::any_of(trace.events.begin(), trace.events.begin() + r.event,
                                            [&](const TraceEvent& ev) {
                                              return ev.dir == Direction::kTx && ev.kind == EventKind::kAck &&
                                                     ev.ack >= covered;
                                            });
      if (acked_before) {
        f.unnecessary_retx17 = true;
        break;
      }
    }
  }

  if (r13 && r16) {
    for (const auto& r : retx) {
      if (r.event > r13->event && r.event < r16->event && !script.drop_packets.contains(r.packet_index)) {
        f.extra_retx_between_13_and_16 = true;
      }
    }
  }

  f.retransmission_count = static_cast<int>(std::count_if(
      retx.begin(), retx.end(), [&](const Retransmission& r) { return r.packet_index <= script.ack_limit_packet; }));

  ClassificationReport report = classify(f);
  for (const auto& r : retx) {
    std::ostringstream note;
    note << "retransmission of packet " << r.packet_index << " (" << to_string(r.kind) << ", sender silent "
         << to_ms(r.gap) << " ms)";
    report.evidence.push_back({r.event, note.str()});
  }
  return report;
}

std::string report_to_json(const ClassificationReport& report) {
  nlohmann::ordered_json obj;
  if (auto l = report.label()) {
    obj["label"] = std::string(to_string(*l));
  } else {
    obj["error"] = std::string(to_string(*report.error()));
  }
  const FeatureVector& f = report.features;
  nlohmann::ordered_json feats;
  feats["rtt_est"] = to_ms(f.rtt_est);
  feats["retx13"] = std::string(to_string(f.retx13));
  feats["retx16"] = std::string(to_string(f.retx16));
  feats["unnecessary_retx17"] = f.unnecessary_retx17;
  feats["extra_retx_between_13_and_16"] = f.extra_retx_between_13_and_16;
  feats["reordering_detected"] = f.reordering_detected;
  feats["retransmission_count"] = f.retransmission_count;
  obj["features"] = feats;
  auto evidence = nlohmann::ordered_json::array();
  for (const auto& e : report.evidence) {
    nlohmann::ordered_json item;
    item["event"] = e.event ? nlohmann::ordered_json(*e.event) : nlohmann::ordered_json(nullptr);
    item["note"] = e.note;
    evidence.push_back(item);
  }
  obj["evidence"] = evidence;
  return obj.dump(2);
}

}  // namespace ccprobe
