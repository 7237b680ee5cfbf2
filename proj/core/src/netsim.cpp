#include "ccprobe/netsim.hpp"

#include <algorithm>
#include <string>
#include <utility>

namespace ccprobe {

void Scenario::validate() const {
  sender_config.validate();
  probe_script.validate();
  if (rtt <= Micros{0}) throw ConfigError("rtt must be positive");
  if (run_deadline <= 10 * rtt) throw ConfigError("run_deadline must exceed 10 * rtt");
  if (event_cap == 0) throw ConfigError("event_cap must be positive");
  const Bytes needed = (probe_script.ack_limit_packet + 1) * probe_script.mss;
  if (page_bytes < needed) {
    throw ConfigError("page_bytes " + std::to_string(page_bytes) + " cannot satisfy the probe script (needs >= " +
                      std::to_string(needed) + ")");
  }
}

std::string_view to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::kProberClosed:
      return "ProberClosed";
    case TerminationReason::kQuiescent:
      return "Quiescent";
    case TerminationReason::kDeadlineExceeded:
      return "DeadlineExceeded";
  }
  return "?";
}

// ---------------------------------------------------------------------------

HttpServerEndpoint::HttpServerEndpoint(SenderConfig own_config, Variant variant, Bytes page_bytes)
    : own_config_(own_config), variant_(variant), page_bytes_(page_bytes) {
  own_config_.validate();
}

std::optional<Micros> HttpServerEndpoint::timer_deadline() const {
  if (halted() || !sender_) return std::nullopt;
  return sender_->state().rto_deadline;
}

std::vector<Segment> HttpServerEndpoint::stamp(std::vector<Segment> segs) const {
  for (Segment& s : segs) {
    s.src = Role::kServer;
    s.ack = peer_ack_;
    s.flags |= kAck;
  }
  return segs;
}

std::vector<Segment> HttpServerEndpoint::step(const Segment& seg, Micros now) {
  if (halted()) return {};
  if (seg.has(kRst)) {
    phase_ = Phase::kHalted;
    return {};
  }

  auto syn_ack = [&] {
    Segment reply;
    reply.src = Role::kServer;
    reply.flags = kSyn | kAck;
    reply.mss_option = sender_->config().mss;
    reply.ip_id = sender_->next_ip_id();
    reply.sent_at = now;
    return std::vector<Segment>{reply};
  };

  switch (phase_) {
    case Phase::kListen: {
      if (!seg.has(kSyn) || seg.has(kAck)) {
        ++diag_.ignored_segments;
        return {};
      }
      SenderConfig cfg = own_config_;
      cfg.mss = std::min(own_config_.mss, seg.mss_option.value_or(own_config_.mss));
      sender_.emplace(cfg, variant_);
      phase_ = Phase::kSynReceived;
      return syn_ack();
    }
    case Phase::kSynReceived:
      if (seg.has(kSyn)) return syn_ack();
      if (seg.len == 0 && seg.has(kAck)) {
        phase_ = Phase::kEstablished;
        return {};
      }
      ++diag_.ignored_segments;
      return {};
    case Phase::kEstablished:
      break;
    case Phase::kHalted:
      return {};
  }

  if (seg.has(kFin)) {
    Segment fin;
    fin.seq = sender_->state().snd_max;
    fin.flags = kFin;
    fin.ip_id = sender_->next_ip_id();
    fin.sent_at = now;
    phase_ = Phase::kHalted;
    return stamp({fin});
  }
  if (seg.is_payload()) {
    peer_ack_ = std::max(peer_ack_, seg.end());
    if (page_enqueued_) {
      ++diag_.ignored_segments;
      return {};
    }
    page_enqueued_ = true;
    ++diag_.page_enqueues;
    sender_->enqueue_app_data(page_bytes_);
    return stamp(sender_->pump_transmissions(now));
  }
  if (seg.has(kAck)) {
    AckResult r = sender_->on_ack(seg.ack, now);
    if (r.error) ++diag_.protocol_errors;
    return stamp(std::move(r.segments));
  }
  ++diag_.ignored_segments;
  return {};
}

std::vector<Segment> HttpServerEndpoint::on_timer(Micros now) {
  auto deadline = timer_deadline();
  if (!deadline || now < *deadline) return {};
  return stamp(sender_->on_rto(now));
}

// ---------------------------------------------------------------------------

Network::Network(HttpServerEndpoint server, Micros one_way_delay, std::set<std::uint64_t> ambient_drops)
    : server_(std::move(server)), delay_(one_way_delay), ambient_drops_(std::move(ambient_drops)) {}

void Network::schedule(Micros at, EventKind kind, Segment seg, std::uint64_t generation) {
  queue_.push(Event{at, next_order_++, kind, std::move(seg), generation});
}

Network::Event Network::pop() {
  Event ev = queue_.top();
  queue_.pop();
  if (ev.time < clock_) throw InternalError("event queue time regression");
  clock_ = ev.time;
  return ev;
}

void Network::send(const Segment& seg) {
  ++stats_.to_server;
  schedule(clock_ + delay_, EventKind::kToServer, seg);
}

void Network::emit_from_server(const std::vector<Segment>& segs) {
  for (const Segment& s : segs) {
    server_emissions_.push_back(s);
    ++stats_.to_prober;
    if (ambient_drops_.contains(stats_.to_prober)) {
      ++stats_.ambient_dropped;
      continue;
    }
    schedule(clock_ + delay_, EventKind::kToProber, s);
  }
}

void Network::sync_timer() {
  auto deadline = server_.timer_deadline();
  if (deadline == scheduled_deadline_) return;
  scheduled_deadline_ = deadline;
  ++timer_generation_;
  if (deadline) schedule(std::max(*deadline, clock_), EventKind::kServerTimer, {}, timer_generation_);
}

void Network::dispatch(const Event& ev) {
  switch (ev.kind) {
    case EventKind::kToProber:
      inbox_.push_back(Arrival{ev.segment, ev.time});
      return;
    case EventKind::kToServer:
      emit_from_server(server_.step(ev.segment, clock_));
      break;
    case EventKind::kServerTimer:
      if (ev.timer_generation != timer_generation_) return;
      scheduled_deadline_.reset();
      emit_from_server(server_.on_timer(clock_));
      break;
  }
  sync_timer();
  if (observer_ && server_.sender()) observer_(server_.sender()->state(), clock_);
}

std::optional<Arrival> Network::receive(Micros deadline) {
  for (;;) {
    if (inbox_head_ < inbox_.size()) {
      Arrival a = inbox_[inbox_head_++];
      if (inbox_head_ == inbox_.size()) {
        inbox_.clear();
        inbox_head_ = 0;
      }
      return a;
    }
    if (queue_.empty()) return std::nullopt;
    if (queue_.top().time > deadline) {
      clock_ = std::max(clock_, deadline);
      return std::nullopt;
    }
    dispatch(pop());
  }
}

std::optional<Arrival> Network::receive_in_flight() {
  if (inbox_head_ < inbox_.size()) return receive(clock_);
  while (!queue_.empty()) {
    if (queue_.top().kind != EventKind::kToProber) {
      queue_.pop();
      continue;
    }
    Event ev = pop();
    return Arrival{ev.segment, ev.time};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

SimWorld sim_init(const Scenario& scenario) {
  scenario.validate();
  SimWorld world;
  world.scenario = scenario;
  world.network = std::make_unique<Network>(
      HttpServerEndpoint(scenario.sender_config, scenario.variant, scenario.page_bytes),
      scenario.one_way_delay(), scenario.ambient_drops);
  world.prober = std::make_unique<Prober>(scenario.probe_script,
                                          ProbeLimits{scenario.run_deadline, scenario.event_cap});
  world.prober->start(*world.network);
  return world;
}

SimResult run_to_completion(SimWorld& world) {
  if (!world.network || !world.prober) throw InternalError("run_to_completion on an uninitialized world");
  SimResult result;
  result.probe_outcome = world.prober->finish(*world.network);
  result.trace = world.prober->session().trace();
  result.end_time = world.network->now();
  if (result.probe_outcome == ProbeOutcome::kCompleted) {
    result.reason = TerminationReason::kProberClosed;
  } else if (world.network->now() >= world.scenario.run_deadline) {
    result.reason = TerminationReason::kDeadlineExceeded;
  } else {
    result.reason = TerminationReason::kQuiescent;
  }
  return result;
}

SimResult simulate(const Scenario& scenario) {
  SimWorld world = sim_init(scenario);
  return run_to_completion(world);
}

}  // namespace ccprobe
