#include "tsg_acc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <set>
#include <sstream>

namespace tsg_acc {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ScenarioInvalid(path + ": " + msg); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys)
{
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!ok.count(k)) fail(join(path, k), "unknown field");
}

const json& object_at(const json& parent, const std::string& path, const char* key)
{
  const auto it = parent.find(key);
  if (it == parent.end()) fail(join(path, key), "missing");
  if (!it->is_object()) fail(join(path, key), "must be an object");
  return *it;
}

double number(const json& v, const std::string& path)
{
  if (!v.is_number()) fail(path, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "must be finite");
  return d;
}

double number_at(const json& obj, const std::string& path, const char* key)
{
  const auto it = obj.find(key);
  if (it == obj.end()) fail(join(path, key), "missing");
  return number(*it, join(path, key));
}

void read_opt(const json& obj, const std::string& path, const char* key, double& out)
{
  const auto it = obj.find(key);
  if (it != obj.end()) out = number(*it, join(path, key));
}

void read_opt(const json& obj, const std::string& path, const char* key, int& out)
{
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_integer()) fail(join(path, key), "must be an integer");
  out = it->get<int>();
}

void read_opt(const json& obj, const std::string& path, const char* key, bool& out)
{
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_boolean()) fail(join(path, key), "must be true or false");
  out = it->get<bool>();
}

Vector2 point(const json& v, const std::string& path)
{
  if (!v.is_array() || v.size() != 2) fail(path, "must be [x, y]");
  return {number(v[0], path + "[0]"), number(v[1], path + "[1]")};
}

// Weight matrix as a diagonal list or a full nested array.
template <int Dim>
Eigen::Matrix<double, Dim, Dim> weight(const json& v, const std::string& path)
{
  Eigen::Matrix<double, Dim, Dim> M = Eigen::Matrix<double, Dim, Dim>::Zero();
  if (!v.is_array() || v.size() != Dim) fail(path, "must be a list of " + std::to_string(Dim) + " diagonal entries or a matrix");
  if (v[0].is_array()) {
    for (int i = 0; i < Dim; ++i) {
      if (!v[i].is_array() || v[i].size() != Dim) fail(path, "matrix rows must have " + std::to_string(Dim) + " entries");
      for (int j = 0; j < Dim; ++j) M(i, j) = number(v[i][j], path + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
  } else {
    for (int i = 0; i < Dim; ++i) M(i, i) = number(v[i], path + "[" + std::to_string(i) + "]");
  }
  return M;
}

SpeedProfile read_speed(const json& road)
{
  const bool has_const = road.contains("speed");
  const bool has_prof = road.contains("speed_profile");
  if (has_const == has_prof) fail("road", "exactly one of speed or speed_profile is required");
  if (has_const) return SpeedProfile::constant(number(road["speed"], "road.speed"));
  const json& p = road["speed_profile"];
  if (!p.is_object()) fail("road.speed_profile", "must be an object with s and v lists");
  allow_keys(p, "road.speed_profile", {"s", "v"});
  SpeedProfile prof;
  prof.s.clear();
  prof.v.clear();
  for (const char* key : {"s", "v"}) {
    const std::string path = std::string("road.speed_profile.") + key;
    if (!p.contains(key) || !p[key].is_array()) fail(path, "must be a list");
    auto& dst = std::string(key) == "s" ? prof.s : prof.v;
    for (std::size_t i = 0; i < p[key].size(); ++i) dst.push_back(number(p[key][i], path + "[" + std::to_string(i) + "]"));
  }
  try {
    prof.validate();
  } catch (const std::invalid_argument& e) {
    fail("road.speed_profile", e.what());
  }
  return prof;
}

LeadSpec read_lead(const json& j)
{
  allow_keys(j, "lead", {"s0", "v0", "schedule"});
  LeadSpec lead;
  lead.s0 = number_at(j, "lead", "s0");
  lead.v0 = number_at(j, "lead", "v0");
  if (j.contains("schedule")) {
    if (!j["schedule"].is_array()) fail("lead.schedule", "must be a list");
    for (std::size_t i = 0; i < j["schedule"].size(); ++i) {
      const std::string path = "lead.schedule[" + std::to_string(i) + "]";
      const json& e = j["schedule"][i];
      if (!e.is_object()) fail(path, "must be an object {t, a}");
      allow_keys(e, path, {"t", "a"});
      lead.schedule.push_back({number_at(e, path, "t"), number_at(e, path, "a")});
    }
  }
  return lead;
}

ObstacleSpec read_obstacle(const json& j, const std::string& path)
{
  if (!j.is_object()) fail(path, "must be an object");
  allow_keys(j, path, {"x", "y", "vx", "vy", "radius", "schedule"});
  ObstacleSpec o;
  o.position = {number_at(j, path, "x"), number_at(j, path, "y")};
  o.velocity = {number_at(j, path, "vx"), number_at(j, path, "vy")};
  o.radius = number_at(j, path, "radius");
  if (j.contains("schedule")) {
    if (!j["schedule"].is_array()) fail(join(path, "schedule"), "must be a list");
    for (std::size_t i = 0; i < j["schedule"].size(); ++i) {
      const std::string p = path + ".schedule[" + std::to_string(i) + "]";
      const json& e = j["schedule"][i];
      if (!e.is_object()) fail(p, "must be an object {t, vx, vy}");
      allow_keys(e, p, {"t", "vx", "vy"});
      o.schedule.push_back({number_at(e, p, "t"), {number_at(e, p, "vx"), number_at(e, p, "vy")}});
    }
  }
  return o;
}

template <class Phase>
void check_schedule(const std::vector<Phase>& sched, const std::string& path)
{
  if (sched.empty()) return;
  if (!(sched.front().t >= 0.0)) fail(path + "[0].t", "times must be >= 0");
  for (std::size_t i = 1; i < sched.size(); ++i)
    if (!(sched[i].t > sched[i - 1].t)) fail(path + "[" + std::to_string(i) + "].t", "times must be strictly increasing");
}

template <class Fn>
void rethrow_as(const std::string& path, Fn&& fn)
{
  try {
    fn();
  } catch (const ScenarioInvalid&) {
    throw;
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

}  // namespace

double LeadSpec::accel_at(double t) const
{
  double a = 0.0;
  for (const LeadPhase& p : schedule) {
    if (p.t > t + 1e-12) break;
    a = p.a;
  }
  return a;
}

Vector2 ObstacleSpec::velocity_at(double t) const
{
  Vector2 v = velocity;
  for (const ObstaclePhase& p : schedule) {
    if (p.t > t + 1e-12) break;
    v = p.velocity;
  }
  return v;
}

std::size_t Scenario::record_count() const { return static_cast<std::size_t>(std::llround(duration / dt)) + 1; }

void Scenario::validate() const
{
  if (schema_version != kSchemaVersion) fail("schema_version", "unsupported version " + std::to_string(schema_version));
  if (!(dt > 0)) fail("dt", "must be > 0");
  if (!(duration > 0)) fail("duration", "must be > 0");
  if (std::abs(duration / dt - std::round(duration / dt)) > 1e-9 * std::max(1.0, duration / dt))
    fail("duration", "must be a whole number of steps dt");
  if ((measurement_noise.array() < 0).any()) fail("measurement_noise", "entries must be >= 0");
  if (waypoints.size() < 2) fail("road.waypoints", "need at least two points");
  rethrow_as("road.waypoints", [&] { Centerline line(waypoints); });
  rethrow_as("road.speed_profile", [&] { speed.validate(); });
  for (double v : speed.v)
    if (v < 0) fail("road.speed", "speeds must be >= 0");
  if (!(ego.v >= 0)) fail("ego.v", "must be >= 0");
  if (lead) {
    if (!(lead->v0 >= 0)) fail("lead.v0", "must be >= 0");
    check_schedule(lead->schedule, "lead.schedule");
  }
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const std::string p = "obstacles[" + std::to_string(i) + "]";
    if (!(obstacles[i].radius > 0)) fail(p + ".radius", "must be > 0");
    check_schedule(obstacles[i].schedule, p + ".schedule");
  }
  if (std::abs(controller.mpc.dt - dt) > 1e-15) fail("mpc.dt", "controller step must equal the scenario dt");
  rethrow_as("mpc", [&] { controller.mpc.validate(); });
  rethrow_as("vehicle", [&] { controller.vehicle.validate(); });
  rethrow_as("acc", [&] { controller.acc.validate(); });
  rethrow_as("c3bf", [&] { controller.c3bf.validate(); });
  rethrow_as("qp", [&] { controller.validate(); });
  rethrow_as("tsg", [&] { tsg.validate(controller.mpc.N); });
}

Scenario parse_scenario(const std::string& text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioInvalid(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) fail("(root)", "must be an object");
  allow_keys(j, "", {"schema_version", "name", "description", "dt", "duration", "seed", "measurement_noise", "road", "ego",
                     "target", "lead", "obstacles", "vehicle", "mpc", "acc", "c3bf", "tsg", "qp"});

  Scenario sc;
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
    fail("schema_version", "missing or not an integer");
  sc.schema_version = j["schema_version"].get<int>();
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail("name", "must be a string");
    sc.name = j["name"].get<std::string>();
  }
  sc.dt = number_at(j, "", "dt");
  sc.duration = number_at(j, "", "duration");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      fail("seed", "must be a non-negative integer");
    sc.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("measurement_noise")) {
    const json& n = j["measurement_noise"];
    if (!n.is_array() || n.size() != 4) fail("measurement_noise", "must be [x, y, psi, v] standard deviations");
    for (int i = 0; i < 4; ++i) sc.measurement_noise(i) = number(n[i], "measurement_noise[" + std::to_string(i) + "]");
  }

  const json& road = object_at(j, "", "road");
  allow_keys(road, "road", {"waypoints", "speed", "speed_profile"});
  if (!road.contains("waypoints") || !road["waypoints"].is_array()) fail("road.waypoints", "must be a list of [x, y]");
  for (std::size_t i = 0; i < road["waypoints"].size(); ++i)
    sc.waypoints.push_back(point(road["waypoints"][i], "road.waypoints[" + std::to_string(i) + "]"));
  if (sc.waypoints.size() < 2) fail("road.waypoints", "need at least two points");
  sc.speed = read_speed(road);
  std::optional<Centerline> line;
  try {
    line.emplace(sc.waypoints);
  } catch (const std::invalid_argument& e) {
    fail("road.waypoints", e.what());
  }

  const json& ego = object_at(j, "", "ego");
  allow_keys(ego, "ego", {"x", "y", "psi", "v", "s", "offset"});
  double ego_s = 0.0;
  if (ego.contains("s")) {
    if (ego.contains("x") || ego.contains("y") || ego.contains("psi")) fail("ego", "give either {s, offset, v} or {x, y, psi, v}");
    ego_s = number_at(ego, "ego", "s");
    double offset = 0.0;
    read_opt(ego, "ego", "offset", offset);
    const ReferencePoint rp = line->sample(ego_s);
    const Vector2 normal{-std::sin(rp.heading), std::cos(rp.heading)};
    const Vector2 p = rp.position + offset * normal;
    sc.ego = {p.x(), p.y(), rp.heading, number_at(ego, "ego", "v")};
  } else {
    sc.ego = {number_at(ego, "ego", "x"), number_at(ego, "ego", "y"), number_at(ego, "ego", "psi"),
              number_at(ego, "ego", "v")};
    ego_s = line->project(sc.ego.position()).s;
  }
  sc.target_s0 = ego_s;
  if (j.contains("target")) {
    const json& t = j["target"];
    if (!t.is_object()) fail("target", "must be an object");
    allow_keys(t, "target", {"s0"});
    read_opt(t, "target", "s0", sc.target_s0);
  }

  if (j.contains("lead") && !j["lead"].is_null()) {
    if (!j["lead"].is_object()) fail("lead", "must be an object");
    sc.lead = read_lead(j["lead"]);
  }
  if (j.contains("obstacles")) {
    if (!j["obstacles"].is_array()) fail("obstacles", "must be a list");
    for (std::size_t i = 0; i < j["obstacles"].size(); ++i)
      sc.obstacles.push_back(read_obstacle(j["obstacles"][i], "obstacles[" + std::to_string(i) + "]"));
  }

  if (j.contains("vehicle")) {
    const json& v = object_at(j, "", "vehicle");
    allow_keys(v, "vehicle", {"l_f", "l_r", "a_min", "a_max", "delta_max", "v_max"});
    VehicleParams& p = sc.controller.vehicle;
    read_opt(v, "vehicle", "l_f", p.l_f);
    read_opt(v, "vehicle", "l_r", p.l_r);
    read_opt(v, "vehicle", "a_min", p.a_min);
    read_opt(v, "vehicle", "a_max", p.a_max);
    read_opt(v, "vehicle", "delta_max", p.delta_max);
    read_opt(v, "vehicle", "v_max", p.v_max);
  }
  MpcConfig& mpc = sc.controller.mpc;
  mpc.dt = sc.dt;
  if (j.contains("mpc")) {
    const json& m = object_at(j, "", "mpc");
    allow_keys(m, "mpc", {"N", "Q", "R", "P", "slack_weight", "rate_a", "rate_delta"});
    read_opt(m, "mpc", "N", mpc.N);
    if (m.contains("Q")) mpc.Q = weight<4>(m["Q"], "mpc.Q");
    if (m.contains("R")) mpc.R = weight<2>(m["R"], "mpc.R");
    if (m.contains("P")) mpc.P = weight<4>(m["P"], "mpc.P");
    read_opt(m, "mpc", "slack_weight", mpc.slack_weight);
    read_opt(m, "mpc", "rate_a", mpc.rate_a);
    read_opt(m, "mpc", "rate_delta", mpc.rate_delta);
  }
  if (j.contains("acc")) {
    const json& a = object_at(j, "", "acc");
    allow_keys(a, "acc", {"time_headway", "standstill", "gamma"});
    read_opt(a, "acc", "time_headway", sc.controller.acc.time_headway);
    read_opt(a, "acc", "standstill", sc.controller.acc.standstill);
    read_opt(a, "acc", "gamma", sc.controller.acc.gamma);
  }
  if (j.contains("c3bf")) {
    const json& c = object_at(j, "", "c3bf");
    allow_keys(c, "c3bf", {"gamma", "eps_v", "inside_slope"});
    read_opt(c, "c3bf", "gamma", sc.controller.c3bf.gamma);
    read_opt(c, "c3bf", "eps_v", sc.controller.c3bf.eps_v);
    read_opt(c, "c3bf", "inside_slope", sc.controller.c3bf.inside_slope);
  }
  if (j.contains("tsg")) {
    const json& t = object_at(j, "", "tsg");
    allow_keys(t, "tsg", {"enabled", "t_sh_min", "bisection_tol", "max_bisections", "horizon", "update_period",
                          "safety_margin", "fallback_step", "slack_tol", "barrier_tol"});
    TsgSettings& s = sc.tsg;
    read_opt(t, "tsg", "enabled", s.enabled);
    read_opt(t, "tsg", "t_sh_min", s.t_sh_min);
    read_opt(t, "tsg", "bisection_tol", s.bisection_tol);
    read_opt(t, "tsg", "max_bisections", s.max_bisections);
    read_opt(t, "tsg", "horizon", s.horizon);
    read_opt(t, "tsg", "update_period", s.update_period);
    read_opt(t, "tsg", "safety_margin", s.safety_margin);
    read_opt(t, "tsg", "fallback_step", s.fallback_step);
    read_opt(t, "tsg", "slack_tol", s.slack_tol);
    read_opt(t, "tsg", "barrier_tol", s.barrier_tol);
  }
  if (j.contains("qp")) {
    const json& q = object_at(j, "", "qp");
    allow_keys(q, "qp", {"tol", "max_iter", "regularization"});
    read_opt(q, "qp", "tol", sc.controller.qp.tol);
    read_opt(q, "qp", "max_iter", sc.controller.qp.max_iter);
    read_opt(q, "qp", "regularization", sc.controller.qp.regularization);
  }

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw ScenarioInvalid(path.string() + ": cannot open scenario file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string set_scenario_param(const std::string& text, const std::string& path, double value)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioInvalid(std::string("malformed JSON: ") + e.what());
  }
  json* node = &j;
  std::stringstream ss(path);
  std::string key;
  while (std::getline(ss, key, '.')) {
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception&) {
        fail(path, "expected a list index at '" + key + "'");
      }
      if (idx >= node->size()) fail(path, "index " + key + " out of range");
      node = &(*node)[idx];
    } else if (node->is_object() || node->is_null()) {
      // missing fields are created; the parser rejects misspelled ones
      if (node->is_null()) *node = json::object();
      node = &(*node)[key];
    } else {
      fail(path, "'" + key + "' is below a non-container value");
    }
  }
  if (!node->is_number() && !node->is_null()) fail(path, "does not name a number");
  if ((node->is_number_integer() || node->is_null()) && value == std::floor(value) && std::abs(value) < 1e15) *node = static_cast<long long>(value);
  else *node = value;
  return j.dump(2);
}

}  // namespace tsg_acc
