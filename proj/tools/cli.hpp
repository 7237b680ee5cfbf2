#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccprobe/netsim.hpp"

namespace ccprobe::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitMismatch = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitClassifyError = 3;

struct CliConfig {
  std::string subcommand;
  std::string variant = "newreno";
  double rtt_ms = 100.0;
  Bytes page_bytes = 3000;
  Bytes mss = 100;
  std::vector<int> drop = {13, 16};
  int ack_limit = 25;
  double timeout_factor = 3.0;
  std::size_t event_cap = ProbeLimits{}.event_cap;
  std::string close_mode = "reset";
  std::string input;
  std::string output;
  bool rtt_sweep = false;
  std::vector<double> sweep_rtts = {10, 50, 100, 200};
};

// Throws ConfigError on invalid values (unknown variant, unsatisfiable script).
Scenario scenario_from(const CliConfig& cfg, Variant variant);
ProbeScript script_from(const CliConfig& cfg);

int cmd_sim(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_classify(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_matrix(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_plot(const CliConfig& cfg, std::ostream& out, std::ostream& err);

// Parses argv and dispatches. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ccprobe::cli
