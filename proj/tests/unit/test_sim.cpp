#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tsg_acc/output.hpp"
#include "tsg_acc/sim.hpp"

using namespace tsg_acc;

namespace {

Scenario small_scenario()
{
  return parse_scenario(R"({
    "schema_version": 1, "name": "small", "dt": 0.1, "duration": 3.0, "seed": 3,
    "measurement_noise": [0.02, 0.02, 0.002, 0.05],
    "road": {"waypoints": [[-20, 0], [300, 0]], "speed": 15},
    "ego": {"x": 0, "y": 0.5, "psi": 0, "v": 14},
    "target": {"s0": 20},
    "lead": {"s0": 60, "v0": 15, "schedule": [{"t": 1, "a": -2}]},
    "obstacles": [{"x": 70, "y": -20, "vx": 0, "vy": 2, "radius": 1.5}],
    "tsg": {"horizon": 10}
  })");
}

std::string csv(const SimLog& log)
{
  std::ostringstream out;
  write_log_csv(out, log);
  return out.str();
}

}  // namespace

TEST_CASE("sim: lead schedule breakpoint inside a step")
{
  LeadSpec spec{0.0, 10.0, {{0.0, 0.0}, {0.25, -4.0}}};
  const LeadState l0{0.0, 10.0, 0.0};
  const LeadState l1 = advance_lead(l0, spec, 0.2, 0.1);
  // 0.05 s at 10 m/s, then 0.05 s braking at -4
  CHECK(l1.s == doctest::Approx(0.5 + 0.5 - 0.5 * 4 * 0.0025));
  CHECK(l1.v == doctest::Approx(9.8));
  CHECK(l1.a == -4.0);
}

TEST_CASE("sim: lead stops and stays stopped")
{
  LeadSpec spec{0.0, 1.0, {{0.0, -4.0}}};
  LeadState l{0.0, 1.0, -4.0};
  for (int k = 0; k < 20; ++k) l = advance_lead(l, spec, 0.1 * k, 0.1);
  CHECK(l.v == 0.0);
  CHECK(l.s == doctest::Approx(0.125));
  CHECK(l.a == 0.0);
}

TEST_CASE("sim: obstacle velocity switch inside a step")
{
  ObstacleSpec spec;
  spec.velocity = {1, 0};
  spec.schedule = {{0.15, {0, 2}}};
  const Obstacle o = advance_obstacle({{0, 0}, {1, 0}, 1.0}, spec, 0.1, 0.1);
  CHECK(o.position.x() == doctest::Approx(0.05));
  CHECK(o.position.y() == doctest::Approx(0.1));
  CHECK(o.velocity == Vector2(0, 2));
}

TEST_CASE("sim: run is deterministic for a seed and sensitive to it")
{
  const Scenario sc = small_scenario();
  const SimResult a = run(sc);
  const SimResult b = run(sc);
  CHECK(a.log.records.size() == 31);
  CHECK(csv(a.log) == csv(b.log));
  const SimResult c = run(sc, {std::nullopt, 4});
  CHECK(csv(a.log) != csv(c.log));
}

TEST_CASE("sim: record fields and metrics")
{
  const SimResult r = run(small_scenario(), {false, std::nullopt});
  CHECK_FALSE(r.log.governor);
  const SimRecord& first = r.log.records.front();
  CHECK(first.t == 0.0);
  CHECK(first.h_acc == doctest::Approx(40.0 - 1.2 * 14.0 - 5.0));
  CHECK(first.gap == doctest::Approx(40.0));
  CHECK(first.lateral == doctest::Approx(0.5));
  REQUIRE(first.clearance.size() == 1);
  CHECK(first.clearance[0] == doctest::Approx(std::hypot(70.0, 20.5) - 1.5));
  for (const SimRecord& rec : r.log.records) CHECK(rec.t_sh == 0.0);
  REQUIRE(r.metrics.min_h_acc);
  REQUIRE(r.metrics.min_clearance);
  CHECK(r.metrics == compute_metrics(r.log));
  CHECK(r.metrics.max_abs_t_sh == 0.0);
}

TEST_CASE("output: number formatting")
{
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1e-300) == "1e-300");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("output: log columns")
{
  const std::vector<std::string> cols = log_columns(2);
  const std::vector<std::string> want{"t", "x", "y", "psi", "v", "a", "delta", "lead_x", "lead_y", "lead_v",
                                      "t_sh", "h_acc", "h_obs_0", "h_obs_1", "slack_acc", "slack_obs_0", "slack_obs_1"};
  CHECK(cols == want);

  const SimResult r = run(small_scenario());
  std::istringstream in(csv(r.log));
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "t,x,y,psi,v,a,delta,lead_x,lead_y,lead_v,t_sh,h_acc,h_obs_0,slack_acc,slack_obs_0");
  std::size_t rows = 0;
  while (std::getline(in, row)) {
    ++rows;
    CHECK(std::count(row.begin(), row.end(), ',') == 14);
  }
  CHECK(rows == r.log.records.size());
}

TEST_CASE("output: metrics json and plots")
{
  Scenario sc = small_scenario();
  sc.lead.reset();
  const SimResult r = run(sc);
  const std::string js = metrics_json(r.log, r.metrics, 3);
  CHECK(js.find("\"min_h_acc\": null") != std::string::npos);
  CHECK(js.find("\"seed\": 3") != std::string::npos);
  CHECK(js.find("{", 1) == std::string::npos);

  std::istringstream in(csv(r.log));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(row.find(",nan,nan,nan,") != std::string::npos);

  for (const std::string& svg : {trajectory_svg(r.log), barriers_svg(r.log), t_sh_svg(r.log), speeds_svg(r.log)}) {
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
  }
}

TEST_CASE("output: metrics json round-trips")
{
  const SimResult r = run(small_scenario());
  const auto j = nlohmann::json::parse(metrics_json(r.log, r.metrics, 3));
  const Metrics& m = r.metrics;
  CHECK(j["min_h_acc"].get<double>() == *m.min_h_acc);
  CHECK(j["min_gap"].get<double>() == *m.min_gap);
  CHECK(j["min_clearance"].get<double>() == *m.min_clearance);
  CHECK(j["lateral_rms"].get<double>() == m.lateral_rms);
  CHECK(j["speed_rms"].get<double>() == m.speed_rms);
  CHECK(j["max_violation_depth"].get<double>() == m.max_violation_depth);
  CHECK(j["max_abs_t_sh"].get<double>() == m.max_abs_t_sh);
  CHECK(j["steps_shifted"].get<int>() == m.steps_shifted);
  CHECK(j["mean_solve_time"].get<double>() == m.mean_solve_time);
  CHECK(j["max_solve_time"].get<double>() == m.max_solve_time);
  CHECK(j["steps"].get<std::size_t>() == r.log.records.size());
}
