// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "support/qp_oracle.hpp"
#include "tsg_acc/output.hpp"
#include "tsg_acc/sim.hpp"

using namespace tsg_acc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome
{
  bool pass{false};
  std::string detail;
};

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const fs::path kScenarios{TSG_ACC_SCENARIO_DIR};

Scenario scenario(const std::string& name) { return load_scenario(kScenarios / (name + ".json")); }

// Runs are cached so that criteria sharing a scenario do not repeat it.
std::map<std::pair<std::string, bool>, SimResult> g_runs;

const SimResult& run_cached(const std::string& name, bool governor)
{
  const auto key = std::make_pair(name, governor);
  auto it = g_runs.find(key);
  if (it == g_runs.end()) it = g_runs.emplace(key, run(scenario(name), {governor, std::nullopt})).first;
  return it->second;
}

std::string csv(const SimLog& log)
{
  std::ostringstream out;
  write_log_csv(out, log);
  return out.str();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

template <class F>
Vector4 fd_state(F&& h, const VehicleState& s, double step = 1e-6)
{
  Vector4 g;
  for (int i = 0; i < 4; ++i) {
    Vector4 xp = s.vec(), xm = s.vec();
    xp(i) += step;
    xm(i) -= step;
    g(i) = (h(VehicleState::from_vec(xp)) - h(VehicleState::from_vec(xm))) / (2 * step);
  }
  return g;
}

double worst(const Vector4& a, const Vector4& b)
{
  double w = 0;
  for (int i = 0; i < 4; ++i) w = std::max(w, rel_err(a(i), b(i)));
  return w;
}

// ---------------------------------------------------------------------------

Outcome qp_oracle()
{
  std::mt19937_64 rng(20240611);
  const auto t0 = Clock::now();
  double err = 0;
  int bad = 0;
  for (int i = 0; i < 500; ++i) {
    const DenseQp qp = oracle::random_qp(rng);
    const auto ref = oracle::enumerate_active_sets(qp.H, qp.g, qp.A, qp.b);
    const QpSolution sol = solve(qp);
    if (!ref || sol.status != QpStatus::Optimal) {
      ++bad;
      continue;
    }
    err = std::max(err, (sol.z - ref->z).lpNorm<Eigen::Infinity>());
  }
  const double elapsed = seconds_since(t0);
  return {bad == 0 && err <= 1e-6 && elapsed < 10.0,
          fmt("max |z - z*|_inf = %.2e, failures %d, %.2f s", err, bad, elapsed)};
}

Outcome gradients()
{
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1, 1), unit(0, 1);
  const VehicleParams vp;
  const double dt = 0.1;
  double e_dyn = 0, e_acc = 0, e_c3 = 0, e_rel = 0;

  for (int i = 0; i < 1000; ++i) {
    const VehicleState s{50 * u(rng), 50 * u(rng), 2.5 * u(rng), 1 + 29 * unit(rng)};
    const ControlInput in{-5 + 7.5 * unit(rng), 0.45 * u(rng)};
    const StateJacobians J = linearize(s, in, dt, vp);
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      Vector4 xp = s.vec(), xm = s.vec();
      xp(j) += h;
      xm(j) -= h;
      const Vector4 col = (step(VehicleState::from_vec(xp), in, dt, vp).vec() - step(VehicleState::from_vec(xm), in, dt, vp).vec()) / (2 * h);
      for (int r = 0; r < 4; ++r) e_dyn = std::max(e_dyn, rel_err(J.A(r, j), col(r)));
    }
    for (int j = 0; j < 2; ++j) {
      ControlInput up = in, um = in;
      (j == 0 ? up.a : up.delta) += h;
      (j == 0 ? um.a : um.delta) -= h;
      const Vector4 col = (step(s, up, dt, vp).vec() - step(s, um, dt, vp).vec()) / (2 * h);
      for (int r = 0; r < 4; ++r) e_dyn = std::max(e_dyn, rel_err(J.B(r, j), col(r)));
    }
  }

  // headway barrier on a road with a straight and a circular part
  std::vector<Vector2> pts{{-40, 0}, {-20, 0}};
  for (int i = 0; i <= 8; ++i) {
    const double th = 0.5 * std::numbers::pi * i / 8;
    pts.emplace_back(50 * std::sin(th), 50 - 50 * std::cos(th));
  }
  const Centerline line(pts);
  const AccCbfParams ap;
  for (int i = 0; i < 1000; ++i) {
    const double s = line.length() * (0.05 + 0.7 * unit(rng));
    const ReferencePoint rp = line.sample(s);
    const Vector2 n{-std::sin(rp.heading), std::cos(rp.heading)};
    const Vector2 p = rp.position + 3.0 * u(rng) * n;
    const VehicleState x{p.x(), p.y(), rp.heading + 0.3 * u(rng), 30 * unit(rng)};
    const double lead = s + 5 + 20 * unit(rng);
    const BarrierEvaluation ev = acc_barrier(x, lead, line, ap, s);
    const Vector4 fd = fd_state([&](const VehicleState& y) { return acc_barrier(y, lead, line, ap, s).value; }, x);
    e_acc = std::max(e_acc, worst(ev.grad_x, fd));
  }

  const C3bfParams cp;
  for (int i = 0; i < 1000; ++i) {
    const double r = 0.5 + 3 * unit(rng);
    const VehicleState x{10 * u(rng), 10 * u(rng), std::numbers::pi * u(rng), 25 * unit(rng)};
    const double th = std::numbers::pi * u(rng);
    // keep clear of the disc boundary where the unregularized form is not smooth
    const Vector2 off = r * (1.2 + 5 * unit(rng)) * Vector2{std::cos(th), std::sin(th)};
    Obstacle o{x.position() + off, {10 * u(rng), 10 * u(rng)}, r};
    if ((o.velocity - ego_velocity(x)).norm() < 0.5) o.velocity += Vector2{2, 0};
    const Vector4 fd = fd_state([&](const VehicleState& y) { return h_c3bf(y, o, cp).value; }, x);
    e_c3 = std::max(e_c3, worst(h_c3bf(x, o, cp).grad_x, fd));
  }
  for (int i = 0; i < 1000; ++i) {
    const double r = 0.5 + 3 * unit(rng);
    const VehicleState x{10 * u(rng), 10 * u(rng), std::numbers::pi * u(rng), 25 * unit(rng)};
    const double th = std::numbers::pi * u(rng);
    // inside and outside the disc; the seam itself is only C0
    double rho = r * (0.05 + 3 * unit(rng));
    if (std::abs(rho - r) < 1e-3) rho += 2e-3;
    const Obstacle o{x.position() + rho * Vector2{std::cos(th), std::sin(th)}, {10 * u(rng), 10 * u(rng)}, r};
    const Vector4 fd = fd_state([&](const VehicleState& y) { return relaxed_h(y, o, cp).value; }, x);
    e_rel = std::max(e_rel, worst(relaxed_h(x, o, cp).grad_x, fd));
  }
  const double w = std::max({e_dyn, e_acc, e_c3, e_rel});
  return {w <= 1e-4, fmt("max rel err: dynamics %.1e, h_acc %.1e, h_c3bf %.1e, relaxed %.1e", e_dyn, e_acc, e_c3, e_rel)};
}

Outcome cone_geometry()
{
  const C3bfParams prm;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1, 1), rad(0.2, 5), dist(1.0001, 20), spd(0.01, 30);
  int checked = 0, mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const double r = rad(rng);
    const double th = std::numbers::pi * u(rng);
    const Vector2 p = r * dist(rng) * Vector2{std::cos(th), std::sin(th)};
    const double ph = std::numbers::pi * u(rng);
    const Vector2 w = spd(rng) * Vector2{std::cos(ph), std::sin(ph)};
    // ego at rest with heading and speed random is equivalent; fold the ego velocity in
    const VehicleState ego{5 * u(rng), 5 * u(rng), std::numbers::pi * u(rng), 20 * (u(rng) + 1)};
    const Obstacle obs{ego.position() + p, w + ego_velocity(ego), r};
    const Vector2 rel = obs.velocity - ego_velocity(ego);
    const double half = std::asin(r / p.norm());
    const Vector2 q = -p;
    const double angle = std::atan2(std::abs(rel.x() * q.y() - rel.y() * q.x()), rel.dot(q));
    if (std::abs(angle - half) < 1e-9) continue;
    ++checked;
    if (in_collision_cone(ego, obs, prm) != (angle < half)) ++mismatches;
  }
  return {mismatches == 0 && checked >= 9900, fmt("%d configurations, %d mismatches", checked, mismatches)};
}

// Follower p'' = a behind a lead on piecewise-constant acceleration. Each step
// solves min (a - a_des)^2 subject to the exact discrete CBF row and a <= a_max.
// Braking is unbounded: with a lower bound the headway set is not control
// invariant at high closing speed and the program can become infeasible.
Outcome forward_invariance()
{
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> unit(0, 1);
  const double dt = 0.1, a_min = -6.0, a_max = 3.0, lead_brake = 1.5;  // a_min only shapes a_des
  double min_h = std::numeric_limits<double>::infinity();
  int infeasible = 0;
  for (int run = 0; run < 100; ++run) {
    AccCbfParams prm;
    prm.time_headway = 0.5 + 1.5 * unit(rng);
    prm.standstill = 2 + 6 * unit(rng);
    prm.gamma = 0.05 + 0.95 * unit(rng);
    const double v_set = 15 + 20 * unit(rng);
    double v = 30 * unit(rng);
    LeadState lead{0, 5 + 25 * unit(rng), 0};
    const double h0 = 30 * unit(rng);
    double p = lead.s - (h0 + prm.time_headway * v + prm.standstill);
    for (int k = 0; k < 1000; ++k) {
      if (k % 100 == 0) lead.a = -lead_brake + 2.5 * unit(rng);
      if (lead.v <= 0 && lead.a < 0) lead.a = 0;
      const double h = h_acc(lead.s - p, v, prm);
      min_h = std::min(min_h, h);
      const LeadState next = lead.predict(dt);
      // h_{k+1} = next.s - p - v dt - T_h v - D_0 - (dt^2/2 + T_h dt) a
      const double c = 0.5 * dt * dt + prm.time_headway * dt;
      const double rhs = next.s - p - v * dt - prm.time_headway * v - prm.standstill - (1 - prm.gamma) * h;
      DenseQp qp = DenseQp::unconstrained(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Constant(1, -std::clamp(0.8 * (v_set - v), a_min, a_max)));
      qp.A = Eigen::MatrixXd::Constant(1, 1, c);
      qp.b = Eigen::VectorXd::Constant(1, rhs);
      qp.lb = Eigen::VectorXd::Constant(1, -std::numeric_limits<double>::infinity());
      qp.ub = Eigen::VectorXd::Constant(1, a_max);
      const QpSolution sol = solve(qp);
      if (sol.status != QpStatus::Optimal) {
        ++infeasible;
        break;
      }
      const double a = sol.z(0);
      p += v * dt + 0.5 * a * dt * dt;
      v += a * dt;
      lead = next;
    }
  }
  return {min_h >= -1e-6 && infeasible == 0, fmt("min h_acc %.3e over 100 x 1000 steps, infeasible runs %d", min_h, infeasible)};
}

Outcome lead_brake()
{
  const auto t0 = Clock::now();
  const Metrics off = run_cached("lead_brake", false).metrics;
  const Metrics on = run_cached("lead_brake", true).metrics;
  const double elapsed = seconds_since(t0);
  const double d0 = scenario("lead_brake").controller.acc.standstill;
  const bool ok = *off.min_h_acc < 0 && *on.min_h_acc >= -1e-3 && *on.min_gap >= d0 - 1e-2 && elapsed < 60.0;
  return {ok, fmt("off: min h %.3f; on: min h %.2e, min gap %.3f m; %.1f s", *off.min_h_acc, *on.min_h_acc, *on.min_gap, elapsed)};
}

Outcome fast_obstacle()
{
  const Metrics off = run_cached("fast_obstacle", false).metrics;
  const Metrics on = run_cached("fast_obstacle", true).metrics;
  const bool ok = *on.min_clearance >= -1e-3 && *off.min_clearance < -1e-3;
  return {ok, fmt("min clearance off %.3f m, on %.2e m", *off.min_clearance, *on.min_clearance)};
}

Outcome transparency()
{
  const SimResult& off = run_cached("curve", false);
  const SimResult& on = run_cached("curve", true);
  const bool same = csv(off.log) == csv(on.log);
  const bool zero = std::all_of(on.log.records.begin(), on.log.records.end(), [](const SimRecord& r) { return r.t_sh == 0.0; });
  return {same && zero && on.log.governor, fmt("logs %s, max |t_sh| %g", same ? "identical" : "differ", on.metrics.max_abs_t_sh)};
}

Outcome recovery()
{
  const SimLog& log = run_cached("recovery", true).log;
  double min_sh = 0;
  for (const SimRecord& r : log.records) min_sh = std::min(min_sh, r.t_sh);
  const std::size_t n = log.records.size();
  const std::size_t from = n - n / 4;
  double lat2 = 0;
  for (std::size_t k = from; k < n; ++k) lat2 += log.records[k].lateral * log.records[k].lateral;
  const double rms = std::sqrt(lat2 / static_cast<double>(n - from));
  const bool back = log.records.back().t_sh == 0.0;
  return {min_sh < 0 && back && rms <= 0.1,
          fmt("t_sh reached %.3f s, final %.3f s; final-quarter lateral RMS %.2e m", min_sh, log.records.back().t_sh, rms)};
}

Outcome bisection()
{
  const Scenario sc = scenario("boundary");
  const Centerline line(sc.waypoints);
  const TargetTrajectory traj =
      make_virtual_target(line, sc.speed, sc.target_s0, sc.dt, static_cast<double>(sc.tsg.horizon + sc.controller.mpc.N + 1) * sc.dt);
  MpcEnvironment env;
  env.line = &line;
  env.lead = LeadState{sc.lead->s0, sc.lead->v0, sc.lead->accel_at(0.0)};
  for (const ObstacleSpec& o : sc.obstacles) env.obstacles.push_back({o.position, o.velocity_at(0.0), o.radius});

  const auto admissible = [&](double t_sh) { return is_admissible(sc.ego, 0.0, t_sh, traj, env, sc.controller, {}, sc.tsg); };
  // largest admissible shift on the 0.01 s grid, scanning down from 0
  double boundary = std::nan("");
  const int steps = static_cast<int>(std::lround(-sc.tsg.t_sh_min / 0.01));
  for (int i = 0; i <= steps; ++i) {
    const double s = -0.01 * i;
    if (admissible(s)) {
      boundary = s;
      break;
    }
  }
  const TsgState st = update_shift({}, sc.ego, 0.0, traj, env, sc.controller, {}, sc.tsg);
  const double gap = std::abs(st.t_sh - boundary);
  return {std::isfinite(boundary) && boundary < 0 && !st.saturated && gap <= sc.tsg.bisection_tol + 1e-12,
          fmt("bisection %.4f s, grid boundary %.2f s, difference %.4f s, %d checks", st.t_sh, boundary, gap, st.checks)};
}

Outcome determinism()
{
  int scenarios = 0;
  std::vector<std::string> differ;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(kScenarios))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    const Scenario sc = load_scenario(f);
    const SimResult a = run(sc);
    const auto cached = g_runs.find({f.stem().string(), sc.tsg.enabled});
    const SimResult b = cached != g_runs.end() ? cached->second : run(sc);
    Metrics ma = a.metrics, mb = b.metrics;
    // wall-clock solve times are the only nondeterministic fields
    ma.mean_solve_time = mb.mean_solve_time = 0;
    ma.max_solve_time = mb.max_solve_time = 0;
    const bool same = csv(a.log) == csv(b.log) && trajectory_svg(a.log) == trajectory_svg(b.log) &&
                      barriers_svg(a.log) == barriers_svg(b.log) && t_sh_svg(a.log) == t_sh_svg(b.log) &&
                      speeds_svg(a.log) == speeds_svg(b.log) && ma == mb;
    if (!same) differ.push_back(f.stem().string());
    ++scenarios;
  }
  std::string names;
  for (const std::string& d : differ) names += " " + d;
  return {scenarios > 0 && differ.empty(), fmt("%d scenarios, differing:%s", scenarios, differ.empty() ? " none" : names.c_str())};
}

}  // namespace

int main()
{
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"QP solver matches active-set enumeration", qp_oracle},
      {"Jacobians and barrier gradients match central differences", gradients},
      {"collision cone membership matches the half-angle test", cone_geometry},
      {"headway barrier is forward invariant for a double integrator", forward_invariance},
      {"lead brake: governor keeps the headway", lead_brake},
      {"fast obstacle: governor keeps clearance", fast_obstacle},
      {"obstacle-free curve: governor is transparent", transparency},
      {"recovery: shift returns to zero and tracking recovers", recovery},
      {"bisection agrees with a 0.01 s grid search", bisection},
      {"seeded runs are byte-identical", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
