#include "ccprobe/tcp_sender.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace ccprobe {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kTahoe:
      return "Tahoe";
    case Variant::kReno:
      return "Reno";
    case Variant::kNewReno:
      return "NewReno";
    case Variant::kNoFastRetransmit:
      return "NoFastRetransmit";
    case Variant::kRenoPlus:
      return "RenoPlus";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (Variant v : kAllVariants) {
    std::string candidate;
    for (char c : to_string(v)) {
      candidate.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (candidate == key) return v;
  }
  return std::nullopt;
}

void SenderConfig::validate() const {
  if (mss <= 0) throw ConfigError("sender mss must be positive");
  if (initial_cwnd < 1) throw ConfigError("initial_cwnd must be at least one segment");
  if (initial_ssthresh <= 0) throw ConfigError("initial_ssthresh must be positive");
  if (dupack_threshold < 1) throw ConfigError("dupack_threshold must be at least 1");
  if (rto_min <= Micros{0}) throw ConfigError("rto_min must be positive");
  if (!(rto_min <= rto_initial && rto_initial <= rto_max)) {
    throw ConfigError("require rto_min <= rto_initial <= rto_max");
  }
}

TcpSender::TcpSender(const SenderConfig& config, Variant variant) : config_(config) {
  config_.validate();
  state_.variant = variant;
  state_.cwnd = config_.initial_cwnd * config_.mss;
  state_.ssthresh = config_.initial_ssthresh;
  state_.rto_current = config_.rto_initial;
}

TcpSender TcpSender::from_state(const SenderConfig& config, const SenderState& state) {
  TcpSender sender(config, state.variant);
  sender.state_ = state;
  for (Bytes seq = state.snd_una; seq < state.snd_max; seq += config.mss) {
    sender.sent_[seq] = SentRecord{std::min(seq + config.mss, state.snd_max), Micros{0}, false};
  }
  return sender;
}

void TcpSender::enqueue_app_data(Bytes nbytes) {
  if (nbytes > 0) state_.app_limit += nbytes;
}

Bytes TcpSender::effective_window() const {
  const bool inflates = state_.variant == Variant::kReno || state_.variant == Variant::kNewReno ||
                        state_.variant == Variant::kRenoPlus;
  if (state_.in_fast_recovery && inflates) {
    return state_.cwnd + state_.dupacks * config_.mss;
  }
  return state_.cwnd;
}

Bytes TcpSender::halved_window() const {
  return std::max(state_.outstanding() / 2, 2 * config_.mss);
}

Segment TcpSender::transmit(Bytes seq, Micros now) {
  Segment seg;
  seg.src = Role::kServer;
  seg.seq = seq;
  seg.len = std::min(config_.mss, state_.app_limit - seq);
  seg.flags = kAck;
  seg.ip_id = next_ip_id();
  seg.sent_at = now;

  auto it = sent_.find(seq);
  if (it != sent_.end()) {
    it->second.retransmitted = true;
  } else {
    sent_[seq] = SentRecord{seg.end(), now, seq < state_.snd_max};
  }
  state_.snd_max = std::max(state_.snd_max, seg.end());
  return seg;
}

std::vector<Segment> TcpSender::pump_transmissions(Micros now) {
  std::vector<Segment> out;
  const Bytes limit = std::min(state_.app_limit, state_.snd_una + effective_window());
  while (state_.snd_nxt < limit) {
    Segment seg = transmit(state_.snd_nxt, now);
    state_.snd_nxt += seg.len;
    out.push_back(seg);
  }
  if (!state_.rto_deadline && state_.snd_max > state_.snd_una) {
    state_.rto_deadline = now + state_.rto_current;
  }
  return out;
}

bool TcpSender::update_rtt(Micros sample) {
  if (sample <= Micros{0}) return false;
  const double r = to_ms(sample);
  if (!state_.srtt_ms) {
    state_.srtt_ms = r;
    state_.rttvar_ms = r / 2.0;
  } else {
    state_.rttvar_ms = 0.75 * state_.rttvar_ms + 0.25 * std::abs(*state_.srtt_ms - r);
    state_.srtt_ms = 0.875 * *state_.srtt_ms + 0.125 * r;
  }
  const Micros rto{std::llround((*state_.srtt_ms + 4.0 * state_.rttvar_ms) * 1000.0)};
  state_.rto_current = std::clamp(rto, config_.rto_min, config_.rto_max);
  return true;
}

void TcpSender::take_rtt_sample(Bytes ack, Micros now) {
  // Karn: no sample when any newly covered segment was ever retransmitted.
  bool ambiguous = false;
  std::optional<Micros> sent_at;
  auto it = sent_.begin();
  while (it != sent_.end() && it->second.end <= ack) {
    ambiguous = ambiguous || it->second.retransmitted;
    sent_at = it->second.first_sent;
    it = sent_.erase(it);
  }
  if (sent_at && !ambiguous) update_rtt(now - *sent_at);
}

void TcpSender::restart_timer(Micros now) {
  if (state_.snd_una >= state_.snd_max) {
    state_.rto_deadline.reset();
  } else {
    state_.rto_deadline = now + state_.rto_current;
  }
}

void TcpSender::enter_loss_response(Micros now, std::vector<Segment>& out) {
  const Bytes mss = config_.mss;
  switch (state_.variant) {
    case Variant::kTahoe: {
      state_.ssthresh = halved_window();
      state_.cwnd = mss;
      Segment seg = transmit(state_.snd_una, now);
      state_.snd_nxt = seg.end();
      out.push_back(seg);
      break;
    }
    case Variant::kReno:
    case Variant::kNewReno:
      state_.ssthresh = halved_window();
      if (state_.variant == Variant::kNewReno) state_.recover = state_.snd_max;
      out.push_back(transmit(state_.snd_una, now));
      state_.cwnd = state_.ssthresh + config_.dupack_threshold * mss;
      state_.in_fast_recovery = true;
      break;
    case Variant::kRenoPlus:
      // Go-back burst: the caller's pump resends from snd_una.
      state_.ssthresh = halved_window();
      state_.in_fast_recovery = true;
      state_.snd_nxt = state_.snd_una;
      break;
    case Variant::kNoFastRetransmit:
      break;
  }
}

void TcpSender::on_new_ack(Bytes ack, Micros now, std::vector<Segment>& out) {
  const Bytes mss = config_.mss;
  const Bytes acked = ack - state_.snd_una;
  take_rtt_sample(ack, now);
  state_.snd_una = ack;
  state_.snd_nxt = std::max(state_.snd_nxt, ack);

  if (state_.in_fast_recovery) {
    if (state_.variant == Variant::kNewReno && ack < state_.recover) {
      // Partial ACK: the next hole is lost too. Duplicate-ACK inflation is kept.
      state_.cwnd = std::max(mss, state_.cwnd - acked + mss);
      out.push_back(transmit(state_.snd_una, now));
    } else {
      state_.in_fast_recovery = false;
      state_.cwnd = state_.ssthresh;
      state_.dupacks = 0;
    }
  } else {
    state_.dupacks = 0;
    if (state_.cwnd < state_.ssthresh) {
      state_.cwnd += mss;
    } else {
      state_.cwnd += std::max<Bytes>(1, mss * mss / state_.cwnd);
    }
  }
  state_.cwnd = std::max(state_.cwnd, mss);
  restart_timer(now);
}

AckResult TcpSender::on_ack(Bytes ack, Micros now) {
  AckResult result;
  if (ack < state_.snd_una) {
    ++protocol_errors_;
    result.error = ProtocolError::kAckRegression;
    return result;
  }
  if (ack > state_.snd_max) {
    ++protocol_errors_;
    result.error = ProtocolError::kAckBeyondSent;
    return result;
  }

  if (ack > state_.snd_una) {
    on_new_ack(ack, now, result.segments);
  } else if (state_.snd_max > state_.snd_una) {
    // Only counted while data is outstanding. Tahoe keeps counting past the
    // threshold so a long run of duplicates triggers one retransmission.
    ++state_.dupacks;
    if (state_.dupacks == config_.dupack_threshold && !state_.in_fast_recovery) {
      enter_loss_response(now, result.segments);
    }
  }

  auto more = pump_transmissions(now);
  result.segments.insert(result.segments.end(), more.begin(), more.end());
  return result;
}

std::vector<Segment> TcpSender::on_rto(Micros now) {
  if (!state_.rto_deadline) throw InternalError("on_rto called with no retransmission timer armed");
  if (now < *state_.rto_deadline) throw InternalError("on_rto called before the timer expired");

  std::vector<Segment> out;
  if (state_.snd_una >= state_.snd_max) {
    state_.rto_deadline.reset();
    return out;
  }
  state_.ssthresh = halved_window();
  state_.cwnd = config_.mss;
  state_.in_fast_recovery = false;
  state_.dupacks = 0;
  state_.snd_nxt = state_.snd_una;

  Segment seg = transmit(state_.snd_una, now);
  state_.snd_nxt = seg.end();
  out.push_back(seg);

  state_.rto_current = std::min(2 * state_.rto_current, config_.rto_max);
  state_.rto_deadline = now + state_.rto_current;
  return out;
}

}  // namespace ccprobe
