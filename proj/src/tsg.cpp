#include "tsg_acc/tsg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsg_acc {

void TsgSettings::validate(int mpc_horizon) const
{
  if (!(t_sh_min < 0) || !std::isfinite(t_sh_min)) throw std::invalid_argument("tsg.t_sh_min must be finite and < 0");
  if (!(bisection_tol > 0)) throw std::invalid_argument("tsg.bisection_tol must be > 0");
  if (max_bisections < 1) throw std::invalid_argument("tsg.max_bisections must be >= 1");
  if (horizon < mpc_horizon) throw std::invalid_argument("tsg.horizon must be >= mpc.N");
  if (!(update_period > 0)) throw std::invalid_argument("tsg.update_period must be > 0");
  if (!std::isfinite(safety_margin)) throw std::invalid_argument("tsg.safety_margin must be finite");
  if (!(fallback_step > 0)) throw std::invalid_argument("tsg.fallback_step must be > 0");
  if (!(slack_tol > 0)) throw std::invalid_argument("tsg.slack_tol must be > 0");
  if (!(barrier_tol >= 0)) throw std::invalid_argument("tsg.barrier_tol must be >= 0");
}

Admissibility check_admissible(const VehicleState& x0, double t, double t_sh, const TargetTrajectory& traj,
                               const MpcEnvironment& env, const ControllerSetup& setup, const ControllerMemory& memory,
                               const TsgSettings& settings)
{
  const double dt = setup.mpc.dt;
  ControllerMemory mem = memory;
  QpSolver solver(setup.qp);
  MpcEnvironment local;
  local.line = env.line;
  Admissibility out;
  VehicleState x = x0;
  double hint = memory.arc_hint.value_or(env.line ? env.line->project(x0.position()).s : 0.0);

  for (int k = 0; k < settings.horizon; ++k) {
    const double tau = k * dt;
    if (env.lead) local.lead = env.lead->predict(tau);
    local.obstacles.clear();
    for (const Obstacle& o : env.obstacles) local.obstacles.push_back(o.predict(tau));

    const ControllerOutput ctl = step_controller(x, t + tau, traj, t_sh, local, setup, mem, solver);
    x = step(x, ctl.input, dt, setup.vehicle);

    double worst = std::numeric_limits<double>::infinity();
    if (env.lead) {
      const BarrierEvaluation h = acc_barrier(x, env.lead->predict(tau + dt).s, *env.line, setup.acc, hint);
      worst = std::min(worst, h.value);
      hint = env.line->project(x.position(), hint).s;
    }
    double clearance = std::numeric_limits<double>::infinity();
    for (const Obstacle& o : env.obstacles) {
      const Obstacle at = o.predict(tau + dt);
      worst = std::min(worst, relaxed_h(x, at, setup.c3bf).value);
      clearance = std::min(clearance, (at.position - x.position()).norm() - at.radius);
    }
    out.min_barrier = std::min(out.min_barrier, worst);
    out.min_clearance = std::min(out.min_clearance, clearance);
    out.max_slack = std::max(out.max_slack, ctl.solution.max_slack());
    out.degraded = out.degraded || ctl.solution.degraded();

    const bool violated = worst < settings.safety_margin - settings.barrier_tol || clearance < -settings.barrier_tol;
    if (violated || ctl.solution.degraded() || ctl.solution.max_slack() >= settings.slack_tol) {
      out.admissible = false;
      out.failed_step = k;
      return out;
    }
  }
  return out;
}

bool is_admissible(const VehicleState& x0, double t, double t_sh, const TargetTrajectory& traj, const MpcEnvironment& env,
                   const ControllerSetup& setup, const ControllerMemory& memory, const TsgSettings& settings)
{
  return check_admissible(x0, t, t_sh, traj, env, setup, memory, settings).admissible;
}

TsgState update_shift(const TsgState& state, const VehicleState& x0, double t, const TargetTrajectory& traj,
                      const MpcEnvironment& env, const ControllerSetup& setup, const ControllerMemory& memory,
                      const TsgSettings& settings)
{
  if (t - state.last_update_time < settings.update_period - 1e-9) return state;

  TsgState next = state;
  next.last_update_time = t;
  next.saturated = false;
  next.checks = 0;
  auto admissible = [&](double cand) {
    ++next.checks;
    return is_admissible(x0, t, cand, traj, env, setup, memory, settings);
  };
  // lo is admissible, hi is not; shrink toward the boundary
  auto bisect = [&](double lo, double hi) {
    for (int i = 0; i < settings.max_bisections && hi - lo > settings.bisection_tol; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (admissible(mid)) lo = mid;
      else hi = mid;
    }
    return lo;
  };

  if (admissible(0.0)) {
    next.t_sh = 0.0;
    return next;
  }
  const double current = std::clamp(state.t_sh, settings.t_sh_min, 0.0);
  if (current < 0.0 && admissible(current)) {
    next.t_sh = bisect(current, 0.0);
    return next;
  }
  double failing = current;
  double step_size = settings.fallback_step;
  while (failing > settings.t_sh_min) {
    const double cand = std::max(failing - step_size, settings.t_sh_min);
    if (admissible(cand)) {
      next.t_sh = bisect(cand, failing);
      return next;
    }
    failing = cand;
    step_size *= 2.0;
  }
  next.t_sh = settings.t_sh_min;
  next.saturated = true;
  return next;
}

}  // namespace tsg_acc
