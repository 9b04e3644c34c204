// tsg-acc: run, check and sweep closed-loop scenarios.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsg_acc/output.hpp"
#include "tsg_acc/scenario.hpp"
#include "tsg_acc/sim.hpp"

namespace fs = std::filesystem;
using namespace tsg_acc;

namespace {

enum Exit : int { kOk = 0, kInvalid = 1, kRuntime = 2 };

std::string read_text(const fs::path& path)
{
  std::ifstream in(path);
  if (!in) throw ScenarioInvalid(path.string() + ": cannot open scenario file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_values(const std::string& list)
{
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ScenarioInvalid("--values: empty entry");
    item = item.substr(b, e - b + 1);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size())
      throw ScenarioInvalid("--values: not a number: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ScenarioInvalid("--values: no values given");
  return out;
}

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

int simulate(const fs::path& scenario, const fs::path& out, bool no_governor, std::optional<std::uint64_t> seed)
{
  const Scenario sc = load_scenario(scenario);
  RunOptions o;
  if (no_governor) o.governor = false;
  o.seed = seed;
  const SimResult r = run(sc, o);
  for (const fs::path& p : emit_outputs(r, seed.value_or(sc.seed), out)) std::cout << p.string() << '\n';
  const Metrics& m = r.metrics;
  std::cerr << sc.name << ": " << r.log.records.size() << " steps, governor " << (r.log.governor ? "on" : "off");
  if (m.min_h_acc) std::cerr << ", min h_acc " << format_number(*m.min_h_acc);
  if (m.min_clearance) std::cerr << ", min clearance " << format_number(*m.min_clearance);
  std::cerr << '\n';
  return kOk;
}

int validate(const fs::path& scenario)
{
  const Scenario sc = load_scenario(scenario);
  std::cout << scenario.string() << ": ok (" << sc.name << ", " << sc.record_count() << " steps, "
            << sc.obstacles.size() << " obstacles" << (sc.lead ? ", lead" : "") << ")\n";
  return kOk;
}

int sweep(const fs::path& scenario, const std::string& param, const std::string& values, const fs::path& out)
{
  const std::string text = read_text(scenario);
  const std::vector<double> vals = parse_values(values);
  // validate every variant before running any of them
  std::vector<Scenario> variants;
  for (double v : vals) variants.push_back(parse_scenario(set_scenario_param(text, param, v)));

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError(out.string() + ": " + ec.message());
  const fs::path path = out / "summary.csv";
  std::ofstream csv(path);
  if (!csv) throw IoError(path.string() + ": cannot open for writing");
  csv << param << ",governor,min_h_acc,min_gap,min_clearance,max_violation_depth,lateral_rms,speed_rms,"
         "max_abs_t_sh,steps_shifted,saturations,degraded_steps,max_slack\n";
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const Metrics m = run(variants[i]).metrics;
    csv << format_number(vals[i]) << ',' << (variants[i].tsg.enabled ? 1 : 0) << ',' << opt(m.min_h_acc) << ','
        << opt(m.min_gap) << ',' << opt(m.min_clearance) << ',' << format_number(m.max_violation_depth) << ','
        << format_number(m.lateral_rms) << ',' << format_number(m.speed_rms) << ','
        << format_number(m.max_abs_t_sh) << ',' << m.steps_shifted << ',' << m.saturations << ','
        << m.degraded_steps << ',' << format_number(m.max_slack) << '\n';
  }
  if (!csv) throw IoError(path.string() + ": write failed");
  std::cout << path.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"TSG-guided MPC-CBF adaptive cruise control simulator"};
  app.set_version_flag("--version", std::string("tsg-acc ") + TSG_ACC_VERSION);
  app.require_subcommand(1);

  std::string scenario, out, param, values;
  bool no_governor = false;
  std::optional<std::uint64_t> seed;

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write log, metrics and plots");
  sim->add_option("--scenario", scenario, "Scenario JSON file")->required();
  sim->add_option("--out", out, "Output directory")->required();
  sim->add_flag("--no-governor", no_governor, "Run with the time-shift governor disabled");
  sim->add_option("--seed", seed, "Override the scenario seed");

  auto* val = app.add_subcommand("validate", "Check a scenario file");
  val->add_option("--scenario", scenario, "Scenario JSON file")->required();

  auto* sw = app.add_subcommand("sweep", "Run a scenario over a list of parameter values");
  sw->add_option("--scenario", scenario, "Scenario JSON file")->required();
  sw->add_option("--param", param, "Dotted path of a numeric field, e.g. acc.time_headway")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  sw->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*sim) return simulate(scenario, out, no_governor, seed);
    if (*val) return validate(scenario);
    if (*sw) return sweep(scenario, param, values, out);
  } catch (const ScenarioInvalid& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kInvalid;
}
