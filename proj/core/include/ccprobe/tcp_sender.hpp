#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "ccprobe/common.hpp"
#include "ccprobe/segment.hpp"

namespace ccprobe {

enum class Variant : std::uint8_t {
  kTahoe,
  kReno,
  kNewReno,
  // Duplicate ACKs are counted but never acted on; only the RTO repairs loss.
  kNoFastRetransmit,
  // Reno whose fast retransmit restarts transmission at snd_una without
  // shrinking cwnd, so segments after the lost one are resent in a burst.
  kRenoPlus,
};

inline constexpr std::array<Variant, 5> kAllVariants = {
    Variant::kTahoe, Variant::kReno, Variant::kNewReno, Variant::kNoFastRetransmit,
    Variant::kRenoPlus};

std::string_view to_string(Variant v);

// Accepts the display names ("NewReno") and lowercase CLI spellings
// ("newreno", "nofastretransmit", "no-fast-retransmit", "renoplus", "reno-plus").
std::optional<Variant> parse_variant(std::string_view name);

struct SenderConfig {
  Bytes mss = 1460;
  int initial_cwnd = 2;  // segments
  Bytes initial_ssthresh = 65535;
  int dupack_threshold = 3;
  Micros rto_initial = from_ms(1000);
  Micros rto_min = from_ms(1000);
  Micros rto_max = from_ms(64000);

  // Throws ConfigError.
  void validate() const;
};

struct SenderState {
  Variant variant = Variant::kNewReno;
  Bytes snd_una = 0;
  Bytes snd_nxt = 0;
  // Highest sequence ever sent. Differs from snd_nxt only after a go-back.
  Bytes snd_max = 0;
  Bytes cwnd = 0;
  Bytes ssthresh = 0;
  int dupacks = 0;
  bool in_fast_recovery = false;
  Bytes recover = 0;
  Micros rto_current{0};
  std::optional<Micros> rto_deadline;
  std::optional<double> srtt_ms;
  double rttvar_ms = 0.0;
  Bytes app_limit = 0;
  std::uint32_t ip_id_counter = 0;

  Bytes flight() const { return snd_nxt - snd_una; }
  Bytes outstanding() const { return snd_max - snd_una; }

  friend bool operator==(const SenderState&, const SenderState&) = default;
};

enum class ProtocolError : std::uint8_t {
  kAckRegression,   // ack < snd_una
  kAckBeyondSent,   // ack > snd_max
};

struct AckResult {
  std::vector<Segment> segments;
  std::optional<ProtocolError> error;
};

// Server-side sender for one connection. All inputs carry their virtual time
// explicitly; identical input sequences produce identical output.
class TcpSender {
 public:
  // Throws ConfigError when the configuration is invalid.
  TcpSender(const SenderConfig& config, Variant variant);

  // Rebuilds a sender around an arbitrary state (tests, replay). Outstanding
  // data is treated as sent once at time zero.
  static TcpSender from_state(const SenderConfig& config, const SenderState& state);

  void enqueue_app_data(Bytes nbytes);

  // Sends whatever the effective window allows.
  std::vector<Segment> pump_transmissions(Micros now);

  AckResult on_ack(Bytes ack, Micros now);

  // Retransmission timer expiry. Throws InternalError when the timer is not
  // armed or has not expired yet.
  std::vector<Segment> on_rto(Micros now);

  // Smoothed RTT update. Returns false (state unchanged) for samples <= 0.
  bool update_rtt(Micros sample);

  // cwnd, inflated by one mss per duplicate ACK while a Reno-family sender is
  // in fast recovery.
  Bytes effective_window() const;

  // Allocates the next IP identification value. Every segment this connection
  // emits, control segments included, takes exactly one.
  std::uint32_t next_ip_id() { return ++state_.ip_id_counter; }

  const SenderState& state() const { return state_; }
  const SenderConfig& config() const { return config_; }
  std::uint64_t protocol_errors() const { return protocol_errors_; }

 private:
  struct SentRecord {
    Bytes end = 0;
    Micros first_sent{0};
    bool retransmitted = false;
  };

  Segment transmit(Bytes seq, Micros now);
  void enter_loss_response(Micros now, std::vector<Segment>& out);
  void on_new_ack(Bytes ack, Micros now, std::vector<Segment>& out);
  void take_rtt_sample(Bytes ack, Micros now);
  void restart_timer(Micros now);
  Bytes halved_window() const;

  SenderConfig config_;
  SenderState state_;
  std::map<Bytes, SentRecord> sent_;  // keyed by segment start
  std::uint64_t protocol_errors_ = 0;
};

}  // namespace ccprobe
