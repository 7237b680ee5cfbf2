#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string_view>
#include <vector>

#include "ccprobe/common.hpp"
#include "ccprobe/prober.hpp"
#include "ccprobe/segment.hpp"
#include "ccprobe/tcp_sender.hpp"
#include "ccprobe/trace_io.hpp"

namespace ccprobe {

struct Scenario {
  Variant variant = Variant::kNewReno;
  Micros rtt = from_ms(100);
  Bytes page_bytes = 3000;
  // The server's own MSS; the connection uses min(own, offered).
  SenderConfig sender_config{};
  ProbeScript probe_script{};
  Micros run_deadline = from_ms(60000);
  std::size_t event_cap = ProbeLimits{}.event_cap;
  // Ordinals (1-based) of server-to-prober segments the link loses. Empty in
  // every probe run; exists for robustness tests only.
  std::set<std::uint64_t> ambient_drops;

  // Throws ConfigError.
  void validate() const;
  Micros one_way_delay() const { return rtt / 2; }
};

struct ServerDiagnostics {
  std::uint64_t ignored_segments = 0;
  std::uint64_t page_enqueues = 0;
  std::uint64_t protocol_errors = 0;
};

// Minimal web server: accepts one connection, answers any nonempty request
// with page_bytes of opaque response data, and stops on RST or FIN.
class HttpServerEndpoint {
 public:
  HttpServerEndpoint(SenderConfig own_config, Variant variant, Bytes page_bytes);

  std::vector<Segment> step(const Segment& seg, Micros now);

  // Fires the sender's retransmission timer if it is due.
  std::vector<Segment> on_timer(Micros now);

  std::optional<Micros> timer_deadline() const;
  bool halted() const { return phase_ == Phase::kHalted; }
  bool established() const { return phase_ == Phase::kEstablished; }
  const std::optional<TcpSender>& sender() const { return sender_; }
  const ServerDiagnostics& diagnostics() const { return diag_; }

 private:
  enum class Phase : std::uint8_t { kListen, kSynReceived, kEstablished, kHalted };

  std::vector<Segment> stamp(std::vector<Segment> segs) const;

  SenderConfig own_config_;
  Variant variant_;
  Bytes page_bytes_;
  Phase phase_ = Phase::kListen;
  std::optional<TcpSender> sender_;
  Bytes peer_ack_ = 0;
  bool page_enqueued_ = false;
  ServerDiagnostics diag_;
};

struct LinkStats {
  std::uint64_t to_server = 0;
  std::uint64_t to_prober = 0;
  std::uint64_t ambient_dropped = 0;
};

// Event queue plus a symmetric fixed-delay lossless link to one server. This
// is the simulator's PacketPort binding.
class Network final : public PacketPort {
 public:
  using SenderObserver = std::function<void(const SenderState&, Micros)>;

  Network(HttpServerEndpoint server, Micros one_way_delay, std::set<std::uint64_t> ambient_drops = {});

  void send(const Segment& seg) override;
  std::optional<Arrival> receive(Micros deadline) override;
  std::optional<Arrival> receive_in_flight() override;
  Micros now() const override { return clock_; }

  std::size_t pending_events() const { return queue_.size(); }
  const HttpServerEndpoint& server() const { return server_; }
  const LinkStats& stats() const { return stats_; }

  // Called with the sender state after every server-side transition.
  void set_sender_observer(SenderObserver observer) { observer_ = std::move(observer); }

  // Every segment the server put on the link, in emission order.
  const std::vector<Segment>& server_emissions() const { return server_emissions_; }

 private:
  enum class EventKind : std::uint8_t { kToServer, kToProber, kServerTimer };

  struct Event {
    Micros time{0};
    std::uint64_t order = 0;
    EventKind kind = EventKind::kToServer;
    Segment segment;
    std::uint64_t timer_generation = 0;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.order > b.order;
    }
  };

  void schedule(Micros at, EventKind kind, Segment seg = {}, std::uint64_t generation = 0);
  Event pop();
  void dispatch(const Event& ev);
  void emit_from_server(const std::vector<Segment>& segs);
  void sync_timer();

  HttpServerEndpoint server_;
  Micros delay_;
  std::set<std::uint64_t> ambient_drops_;
  Micros clock_{0};
  std::uint64_t next_order_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::vector<Arrival> inbox_;
  std::size_t inbox_head_ = 0;
  std::optional<Micros> scheduled_deadline_;
  std::uint64_t timer_generation_ = 0;
  LinkStats stats_;
  SenderObserver observer_;
  std::vector<Segment> server_emissions_;
};

enum class TerminationReason : std::uint8_t { kProberClosed, kQuiescent, kDeadlineExceeded };

std::string_view to_string(TerminationReason r);

// One prober, one server, one link.
struct SimWorld {
  Scenario scenario;
  std::unique_ptr<Network> network;
  std::unique_ptr<Prober> prober;
};

struct SimResult {
  ObservedTrace trace;
  TerminationReason reason = TerminationReason::kQuiescent;
  ProbeOutcome probe_outcome = ProbeOutcome::kCompleted;
  Micros end_time{0};
};

// Validates the scenario and builds a world whose only pending event is the
// prober's SYN in flight. Throws ConfigError.
SimWorld sim_init(const Scenario& scenario);

SimResult run_to_completion(SimWorld& world);

// sim_init + run_to_completion.
SimResult simulate(const Scenario& scenario);

}  // namespace ccprobe
