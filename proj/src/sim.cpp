#include "tsg_acc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace tsg_acc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Breakpoints of a schedule strictly inside (t, t + dt).
template <class Phase>
std::vector<double> breakpoints(const std::vector<Phase>& sched, double t, double dt)
{
  std::vector<double> out;
  for (const Phase& p : sched)
    if (p.t > t + 1e-12 && p.t < t + dt - 1e-12) out.push_back(p.t);
  return out;
}

}  // namespace

LeadState advance_lead(const LeadState& lead, const LeadSpec& spec, double t, double dt)
{
  LeadState s = lead;
  double now = t;
  std::vector<double> stops = breakpoints(spec.schedule, t, dt);
  stops.push_back(t + dt);
  for (double next : stops) {
    s.a = spec.accel_at(now);
    s = s.predict(next - now);
    now = next;
  }
  s.a = spec.accel_at(t + dt);
  if (s.v <= 0.0 && s.a < 0.0) s.a = 0.0;
  return s;
}

Obstacle advance_obstacle(const Obstacle& obs, const ObstacleSpec& spec, double t, double dt)
{
  Obstacle o = obs;
  double now = t;
  std::vector<double> stops = breakpoints(spec.schedule, t, dt);
  stops.push_back(t + dt);
  for (double next : stops) {
    o.velocity = spec.velocity_at(now);
    o = o.predict(next - now);
    now = next;
  }
  o.velocity = spec.velocity_at(t + dt);
  return o;
}

SimResult run(const Scenario& sc, const RunOptions& options)
{
  sc.validate();
  const ControllerSetup& setup = sc.controller;
  const bool governor = options.governor.value_or(sc.tsg.enabled);
  const Centerline line(sc.waypoints);
  const double dt = sc.dt;
  const std::size_t count = sc.record_count();
  const double horizon_time = static_cast<double>(count + setup.mpc.N + 1) * dt;
  const TargetTrajectory traj = make_virtual_target(line, sc.speed, sc.target_s0, dt, horizon_time);

  std::mt19937_64 rng(options.seed.value_or(sc.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool noisy = (sc.measurement_noise.array() > 0).any();

  VehicleState x = sc.ego;
  std::optional<LeadState> lead;
  if (sc.lead) lead = LeadState{sc.lead->s0, sc.lead->v0, sc.lead->accel_at(0.0)};
  std::vector<Obstacle> obstacles;
  for (const ObstacleSpec& o : sc.obstacles) obstacles.push_back({o.position, o.velocity_at(0.0), o.radius});

  ControllerMemory memory;
  QpSolver solver(setup.qp);
  TsgState tsg;
  double ego_hint = line.project(x.position()).s;

  SimResult result;
  SimLog& log = result.log;
  log.name = sc.name;
  log.dt = dt;
  log.governor = governor;
  log.has_lead = sc.lead.has_value();
  log.n_obstacles = sc.obstacles.size();
  log.waypoints = sc.waypoints;
  log.records.reserve(count);

  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * dt;
    MpcEnvironment env;
    env.line = &line;
    env.lead = lead;
    env.obstacles = obstacles;

    VehicleState measured = x;
    if (noisy) {
      Vector4 v = x.vec();
      for (int i = 0; i < 4; ++i) v(i) += sc.measurement_noise(i) * normal(rng);
      measured = VehicleState::from_vec(v);
      measured.v = std::max(measured.v, 0.0);
    }

    if (governor) tsg = update_shift(tsg, measured, t, traj, env, setup, memory, sc.tsg);
    const ControllerOutput ctl = step_controller(measured, t, traj, governor ? tsg.t_sh : 0.0, env, setup, memory, solver);

    SimRecord rec;
    rec.t = t;
    rec.ego = x;
    rec.input = ctl.input;
    const Projection pr = line.project(x.position(), ego_hint);
    ego_hint = pr.s;
    rec.ego_s = pr.s;
    rec.lateral = pr.lateral;
    rec.ref_speed = sc.speed.at(pr.s);
    rec.t_sh = governor ? tsg.t_sh : 0.0;
    rec.saturated = governor && tsg.saturated;
    rec.tsg_checks = governor ? tsg.checks : 0;
    rec.lead = lead;
    rec.obstacles = obstacles;
    rec.h_acc = kNaN;
    rec.gap = kNaN;
    if (lead) {
      rec.lead_position = line.position(lead->s);
      rec.h_acc = acc_barrier(x, lead->s, line, setup.acc, pr.s).value;
      rec.gap = lead->s - pr.s;
    }
    for (const Obstacle& o : obstacles) {
      rec.h_obs.push_back(relaxed_h(x, o, setup.c3bf).value);
      rec.clearance.push_back((o.position - x.position()).norm() - o.radius);
    }
    const std::size_t per_stage = (lead ? 1 : 0) + obstacles.size();
    rec.slack_acc = 0.0;
    rec.slack_obs.assign(obstacles.size(), 0.0);
    for (std::size_t i = 0; i < ctl.solution.slacks.size(); ++i) {
      const std::size_t j = i % per_stage;
      const double s = ctl.solution.slacks[i];
      if (lead && j == 0) rec.slack_acc = std::max(rec.slack_acc, s);
      else rec.slack_obs[j - (lead ? 1 : 0)] = std::max(rec.slack_obs[j - (lead ? 1 : 0)], s);
    }
    rec.qp_iterations = ctl.solution.iterations;
    rec.solve_time = ctl.solution.solve_time;
    rec.degraded = ctl.solution.degraded();
    log.records.push_back(std::move(rec));

    if (k + 1 == count) break;
    x = step(x, ctl.input, dt, setup.vehicle);
    if (lead) lead = advance_lead(*lead, *sc.lead, t, dt);
    for (std::size_t i = 0; i < obstacles.size(); ++i) obstacles[i] = advance_obstacle(obstacles[i], sc.obstacles[i], t, dt);
  }

  result.metrics = compute_metrics(log);
  return result;
}

Metrics compute_metrics(const SimLog& log)
{
  Metrics m;
  double lat2 = 0, spd2 = 0, iters = 0, time = 0;
  double worst_barrier = std::numeric_limits<double>::infinity();
  for (const SimRecord& r : log.records) {
    if (log.has_lead) {
      m.min_h_acc = std::min(m.min_h_acc.value_or(r.h_acc), r.h_acc);
      m.min_gap = std::min(m.min_gap.value_or(r.gap), r.gap);
      worst_barrier = std::min(worst_barrier, r.h_acc);
    }
    for (std::size_t i = 0; i < r.h_obs.size(); ++i) {
      m.min_clearance = std::min(m.min_clearance.value_or(r.clearance[i]), r.clearance[i]);
      worst_barrier = std::min(worst_barrier, r.h_obs[i]);
    }
    lat2 += r.lateral * r.lateral;
    spd2 += (r.ego.v - r.ref_speed) * (r.ego.v - r.ref_speed);
    m.max_abs_t_sh = std::max(m.max_abs_t_sh, std::abs(r.t_sh));
    m.steps_shifted += r.t_sh < 0.0;
    m.saturations += r.saturated;
    m.degraded_steps += r.degraded;
    m.max_slack = std::max(m.max_slack, r.slack_acc);
    for (double s : r.slack_obs) m.max_slack = std::max(m.max_slack, s);
    iters += r.qp_iterations;
    time += r.solve_time;
    m.max_solve_time = std::max(m.max_solve_time, r.solve_time);
  }
  const double n = std::max<double>(1.0, static_cast<double>(log.records.size()));
  m.max_violation_depth = std::isfinite(worst_barrier) ? std::max(0.0, -worst_barrier) : 0.0;
  m.lateral_rms = std::sqrt(lat2 / n);
  m.speed_rms = std::sqrt(spd2 / n);
  m.mean_qp_iterations = iters / n;
  m.mean_solve_time = time / n;
  return m;
}

}  // namespace tsg_acc
