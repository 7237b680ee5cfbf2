#include "cli.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "ccprobe/classifier.hpp"
#include "ccprobe/trace_io.hpp"

namespace ccprobe::cli {
namespace {

Micros micros_from_ms(double ms) { return Micros{std::llround(ms * 1000.0)}; }

std::optional<ObservedTrace> load_trace(const std::string& path, std::ostream& err) {
  if (path.empty()) {
    err << "error: --in is required\n";
    return std::nullopt;
  }
  std::ifstream in(path);
  if (!in) {
    err << "error: cannot open " << path << "\n";
    return std::nullopt;
  }
  try {
    return read_trace(in);
  } catch (const std::exception& e) {
    err << "error: " << path << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

struct MatrixCell {
  Variant actual;
  double rtt_ms;
  ClassificationReport report;
};

}  // namespace

ProbeScript script_from(const CliConfig& cfg) {
  ProbeScript script;
  script.mss = cfg.mss;
  script.drop_packets = std::set<int>(cfg.drop.begin(), cfg.drop.end());
  script.ack_limit_packet = cfg.ack_limit;
  if (cfg.close_mode == "reset") {
    script.close_mode = CloseMode::kReset;
  } else if (cfg.close_mode == "fin") {
    script.close_mode = CloseMode::kFin;
  } else {
    throw ConfigError("unknown close mode '" + cfg.close_mode + "' (expected reset or fin)");
  }
  script.validate();
  return script;
}

Scenario scenario_from(const CliConfig& cfg, Variant variant) {
  Scenario s;
  s.variant = variant;
  if (!(cfg.rtt_ms > 0)) throw ConfigError("--rtt-ms must be positive");
  s.rtt = micros_from_ms(cfg.rtt_ms);
  s.page_bytes = cfg.page_bytes;
  s.probe_script = script_from(cfg);
  s.event_cap = cfg.event_cap;
  s.run_deadline = std::max(from_ms(60000), 20 * s.rtt);
  s.validate();
  return s;
}

int cmd_sim(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  auto variant = parse_variant(cfg.variant);
  if (!variant) {
    err << "error: unknown variant '" << cfg.variant << "'\n";
    return kExitUsage;
  }
  Scenario scenario;
  try {
    scenario = scenario_from(cfg, *variant);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  SimResult result = simulate(scenario);
  if (!cfg.output.empty()) {
    std::ofstream file(cfg.output);
    if (!file) {
      err << "error: cannot write " << cfg.output << "\n";
      return kExitUsage;
    }
    write_trace(result.trace, file);
  }
  out << "variant: " << to_string(*variant) << "\n"
      << "termination: " << to_string(result.reason) << "\n"
      << "probe: " << to_string(result.probe_outcome) << "\n"
      << "events: " << result.trace.events.size() << "\n"
      << "end_ms: " << to_ms(result.end_time) << "\n";
  return result.reason == TerminationReason::kProberClosed ? kExitOk : kExitMismatch;
}

int cmd_classify(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  ProbeScript script;
  try {
    script = script_from(cfg);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  auto trace = load_trace(cfg.input, err);
  if (!trace) return kExitUsage;
  ClassifierConfig ccfg;
  ccfg.timeout_factor = cfg.timeout_factor;
  ClassificationReport report = classify_trace(*trace, script, ccfg);
  out << report_to_json(report) << "\n";
  return report.has_label() ? kExitOk : kExitClassifyError;
}

int cmd_matrix(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  std::vector<double> rtts = cfg.rtt_sweep ? cfg.sweep_rtts : std::vector<double>{cfg.rtt_ms};
  ProbeScript script;
  std::vector<std::pair<Variant, Scenario>> scenarios;
  try {
    script = script_from(cfg);
    for (double rtt : rtts) {
      CliConfig c = cfg;
      c.rtt_ms = rtt;
      for (Variant v : kAllVariants) scenarios.emplace_back(v, scenario_from(c, v));
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  ClassifierConfig ccfg;
  ccfg.timeout_factor = cfg.timeout_factor;
  std::vector<std::future<MatrixCell>> jobs;
  for (const auto& [variant, scenario] : scenarios) {
    jobs.push_back(std::async(std::launch::async, [variant = variant, scenario = scenario, script, ccfg] {
      SimResult r = simulate(scenario);
      return MatrixCell{variant, to_ms(scenario.rtt), classify_trace(r.trace, script, ccfg)};
    }));
  }

  constexpr std::size_t kOther = kAllVariants.size();
  std::array<std::array<int, kAllVariants.size() + 1>, kAllVariants.size()> counts{};
  bool identity = true;
  for (auto& job : jobs) {
    MatrixCell cell = job.get();
    const auto row = static_cast<std::size_t>(std::find(kAllVariants.begin(), kAllVariants.end(), cell.actual) -
                                              kAllVariants.begin());
    std::size_t col = kOther;
    for (std::size_t i = 0; i < kAllVariants.size(); ++i) {
      if (cell.report.label() == expected_label(kAllVariants[i])) col = i;
    }
    ++counts[row][col];
    if (col != row) {
      identity = false;
      out << "mismatch: " << to_string(cell.actual) << " at rtt " << cell.rtt_ms << " ms -> ";
      if (auto l = cell.report.label()) {
        out << to_string(*l);
      } else {
        out << to_string(*cell.report.error());
      }
      out << "\n";
    }
  }

  out << "runs: " << scenarios.size() << " (rtt ms:";
  for (double r : rtts) out << ' ' << r;
  out << ")\n";
  out << std::left << std::setw(18) << "actual\\label";
  for (Variant v : kAllVariants) out << std::setw(18) << to_string(v);
  out << "other\n";
  for (std::size_t r = 0; r < kAllVariants.size(); ++r) {
    out << std::setw(18) << to_string(kAllVariants[r]);
    for (std::size_t c = 0; c <= kAllVariants.size(); ++c) {
      if (c == kOther) {
        out << counts[r][c];
      } else {
        out << std::setw(18) << counts[r][c];
      }
    }
    out << "\n";
  }
  out << (identity ? "identity: yes\n" : "identity: no\n");
  return identity ? kExitOk : kExitMismatch;
}

int cmd_plot(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  auto trace = load_trace(cfg.input, err);
  if (!trace) return kExitUsage;
  const auto rows = emit_plot_points(*trace);
  if (cfg.output.empty()) {
    write_plot(rows, out);
    return kExitOk;
  }
  std::ofstream file(cfg.output);
  if (!file) {
    err << "error: cannot write " << cfg.output << "\n";
    return kExitUsage;
  }
  write_plot(rows, file);
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  CLI::App app{"Congestion-control identification lab: simulate probes, classify traces"};
  app.require_subcommand(1);

  auto add_script_flags = [&cfg](CLI::App* sub) {
    sub->add_option("--mss", cfg.mss, "MSS the prober offers")->capture_default_str();
    sub->add_option("--drop", cfg.drop, "packet indices to drop once")->delimiter(',')->capture_default_str();
    sub->add_option("--ack-limit", cfg.ack_limit, "close after acknowledging this packet")->capture_default_str();
    sub->add_option("--close-mode", cfg.close_mode, "reset or fin")->capture_default_str();
  };
  auto add_sim_flags = [&cfg](CLI::App* sub) {
    sub->add_option("--rtt-ms", cfg.rtt_ms, "link round-trip time")->capture_default_str();
    sub->add_option("--page-bytes", cfg.page_bytes, "response size")->capture_default_str();
    sub->add_option("--event-cap", cfg.event_cap, "trace event cap")->capture_default_str();
  };

  auto* sim = app.add_subcommand("sim", "run one probe against a simulated server, write its trace");
  sim->add_option("--variant", cfg.variant, "tahoe|reno|newreno|nofastretransmit|renoplus")->capture_default_str();
  sim->add_option("--out", cfg.output, "trace output path (JSON lines)");
  add_sim_flags(sim);
  add_script_flags(sim);

  auto* classify = app.add_subcommand("classify", "classify a trace file");
  classify->add_option("--in", cfg.input, "trace path")->required();
  classify->add_option("--timeout-factor", cfg.timeout_factor, "timeout threshold in RTTs")->capture_default_str();
  add_script_flags(classify);

  auto* matrix = app.add_subcommand("matrix", "probe and classify every variant, print the confusion matrix");
  matrix->add_option("--timeout-factor", cfg.timeout_factor, "timeout threshold in RTTs")->capture_default_str();
  matrix->add_flag("--rtt-sweep", cfg.rtt_sweep, "repeat over the RTT sweep list");
  matrix->add_option("--sweep-rtts", cfg.sweep_rtts, "RTTs (ms) used by --rtt-sweep")
      ->delimiter(',')
      ->capture_default_str();
  add_sim_flags(matrix);
  add_script_flags(matrix);

  auto* plot = app.add_subcommand("plot", "emit time-sequence plot points from a trace");
  plot->add_option("--in", cfg.input, "trace path")->required();
  plot->add_option("--out", cfg.output, "CSV output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_sim(cfg, out, err);
    if (classify->parsed()) return cmd_classify(cfg, out, err);
    if (matrix->parsed()) return cmd_matrix(cfg, out, err);
    if (plot->parsed()) return cmd_plot(cfg, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace ccprobe::cli
