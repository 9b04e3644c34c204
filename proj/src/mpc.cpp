#include "tsg_acc/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace tsg_acc {

namespace {

bool psd(const Eigen::MatrixXd& M, double tol = 1e-12)
{
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  return es.eigenvalues().minCoeff() >= -tol;
}

// Rotation of the state error into the reference frame (lon, lat, heading, speed).
Matrix4 error_frame(double heading)
{
  const double c = std::cos(heading), s = std::sin(heading);
  Matrix4 E = Matrix4::Identity();
  E(0, 0) = c;
  E(0, 1) = s;
  E(1, 0) = -s;
  E(1, 1) = c;
  return E;
}

Vector4 tracking_error(const VehicleState& x, const VehicleState& ref)
{
  const Matrix4 E = error_frame(ref.psi);
  Vector4 d = x.vec() - ref.vec();
  d(2) = angle_diff(x.psi, ref.psi);
  return E * d;
}

// Error of x against the reference. On a centerline: arc-length lag, lateral
// offset and heading error at the ego's own foot point, speed error; this keeps
// a lagging ego on the lane. Without one: the error in the reference frame.
Vector4 stage_error(const VehicleState& x, const VehicleState& ref, const Centerline* line, double s_hint, double ref_s,
                    Projection* foot = nullptr)
{
  if (!line) return tracking_error(x, ref);
  const Projection p = line->project(x.position(), s_hint);
  if (foot) *foot = p;
  return {p.s - ref_s, p.lateral, angle_diff(x.psi, p.heading), x.v - ref.v};
}

}  // namespace

void MpcConfig::validate() const
{
  if (N < 1) throw std::invalid_argument("mpc.N must be >= 1");
  if (!(dt > 0)) throw std::invalid_argument("mpc.dt must be > 0");
  if (!psd(Q)) throw std::invalid_argument("mpc.Q must be symmetric positive semidefinite");
  if (!psd(P)) throw std::invalid_argument("mpc.P must be symmetric positive semidefinite");
  if (!psd(R) || !(Eigen::SelfAdjointEigenSolver<Matrix2>(R).eigenvalues().minCoeff() > 0))
    throw std::invalid_argument("mpc.R must be symmetric positive definite");
  const double scale = std::max(Q.norm(), R.norm());
  if (!(slack_weight >= 1e3 * scale))
    throw std::invalid_argument("mpc.slack_weight must be >= 1e3 * max(|Q|, |R|) = " + std::to_string(1e3 * scale));
  if (!(rate_a > 0) || !(rate_delta > 0)) throw std::invalid_argument("mpc rate limits must be > 0");
}

void ControllerSetup::validate() const
{
  mpc.validate();
  vehicle.validate();
  acc.validate();
  c3bf.validate();
  if (!(qp.tol > 0) || qp.max_iter < 1 || !(qp.regularization >= 0))
    throw std::invalid_argument("qp settings: tol > 0, max_iter >= 1, regularization >= 0");
}

double MpcSolution::max_slack() const
{
  double m = 0;
  for (double s : slacks) m = std::max(m, s);
  return m;
}

Linearization linearize_along(const VehicleState& x0, std::vector<ControlInput> inputs, const Centerline* line,
                              double s_hint, const MpcConfig& cfg, const VehicleParams& vehicle)
{
  Linearization lin;
  lin.states.push_back(x0);
  lin.arc_hints.push_back(line ? line->project(x0.position(), s_hint).s : 0.0);
  for (auto& u : inputs) {
    u = clamp_input(u, vehicle);
    const VehicleState& x = lin.states.back();
    lin.jacs.push_back(linearize(x, u, cfg.dt, vehicle));
    lin.states.push_back(step(x, u, cfg.dt, vehicle));
    lin.arc_hints.push_back(line ? line->project(lin.states.back().position(), lin.arc_hints.back()).s : 0.0);
  }
  lin.inputs = std::move(inputs);
  return lin;
}

std::vector<ControlInput> reference_inputs(const std::vector<VehicleState>& ref_window, const MpcConfig& cfg,
                                           const VehicleParams& vehicle)
{
  std::vector<ControlInput> out;
  for (int k = 0; k < cfg.N; ++k) {
    const VehicleState& r0 = ref_window[k];
    const VehicleState& r1 = ref_window[k + 1];
    ControlInput u{(r1.v - r0.v) / cfg.dt, 0.0};
    const double dist = (r1.position() - r0.position()).norm();
    if (dist > 1e-6) {
      const double kappa = angle_diff(r1.psi, r0.psi) / dist;
      const double beta = std::asin(std::clamp(kappa * vehicle.l_r, -1.0, 1.0));
      u.delta = std::atan(std::tan(beta) * vehicle.wheelbase() / vehicle.l_r);
    }
    out.push_back(clamp_input(u, vehicle));
  }
  return out;
}

MpcProblem build_problem(const VehicleState& x0, const std::vector<VehicleState>& ref_window, const MpcEnvironment& env,
                         const ControllerSetup& setup, const ControllerMemory& memory)
{
  const MpcConfig& cfg = setup.mpc;
  const VehicleParams& veh = setup.vehicle;
  const int N = cfg.N;
  if (static_cast<int>(ref_window.size()) != N + 1)
    throw DimensionMismatch("reference window has " + std::to_string(ref_window.size()) + " states, expected " +
                            std::to_string(N + 1));
  if (env.lead && !env.line) throw std::invalid_argument("a lead vehicle needs a centerline");

  MpcProblem pb;
  pb.has_acc = env.lead.has_value();
  pb.n_obstacles = env.obstacles.size();
  const int per_stage = (pb.has_acc ? 1 : 0) + static_cast<int>(pb.n_obstacles);
  pb.n_inputs = 2 * N;
  pb.n_slacks = per_stage * N;
  const int n = pb.n_inputs + pb.n_slacks;

  std::vector<ControlInput> nominal =
      static_cast<int>(memory.inputs.size()) == N ? memory.inputs : reference_inputs(ref_window, cfg, veh);
  double hint = memory.arc_hint.value_or(0.0);
  if (env.line && !memory.arc_hint) hint = env.line->project(x0.position()).s;
  pb.lin = linearize_along(x0, std::move(nominal), env.line, hint, cfg, veh);
  const Linearization& lin = pb.lin;

  // condensing: dx_k = G_k du
  pb.G.assign(N + 1, Eigen::MatrixXd::Zero(4, pb.n_inputs));
  for (int k = 0; k < N; ++k) {
    pb.G[k + 1] = lin.jacs[k].A * pb.G[k];
    pb.G[k + 1].middleCols(2 * k, 2) += lin.jacs[k].B;
  }

  DenseQp& qp = pb.qp;
  qp.H = Eigen::MatrixXd::Zero(n, n);
  qp.g = Eigen::VectorXd::Zero(n);
  auto Huu = qp.H.topLeftCorner(pb.n_inputs, pb.n_inputs);
  auto gu = qp.g.head(pb.n_inputs);

  // Progress along the path responds to the inputs through the speed only. With the
  // geometric sensitivity to heading the optimizer weaves to give up progress when
  // braking saturates. Gp[k] moves the ego along its nominal headings.
  std::vector<Eigen::RowVectorXd> progress(N + 1, Eigen::RowVectorXd::Zero(pb.n_inputs));
  std::vector<Eigen::MatrixXd> Gp(N + 1, Eigen::MatrixXd::Zero(4, pb.n_inputs));
  for (int k = 1; k <= N; ++k) {
    Eigen::RowVectorXd ds = cfg.dt * pb.G[k - 1].row(3);
    ds(2 * (k - 1)) += 0.5 * cfg.dt * cfg.dt;
    progress[k] = progress[k - 1] + ds;
    const double psi = lin.states[k - 1].psi;
    Gp[k].row(0) = Gp[k - 1].row(0) + std::cos(psi) * ds;
    Gp[k].row(1) = Gp[k - 1].row(1) + std::sin(psi) * ds;
    Gp[k].row(3) = pb.G[k].row(3);
  }

  pb.line = env.line;
  if (env.line) {
    // reference states lie on the centerline (up to interpolation between samples);
    // a foot point well off it means Newton went astray
    auto ref_arc = [&](const Vector2& p, double hint) {
      const Projection local = env.line->project(p, hint);
      return std::abs(local.lateral) < 0.1 ? local.s : env.line->project(p).s;
    };
    const Projection ego = env.line->project(x0.position(), lin.arc_hints[0]);
    const Vector2 tangent{std::cos(ego.heading), std::sin(ego.heading)};
    pb.ref_arcs.push_back(ref_arc(ref_window[0].position(), ego.s + (ref_window[0].position() - x0.position()).dot(tangent)));
    for (int k = 1; k <= N; ++k) pb.ref_arcs.push_back(ref_arc(ref_window[k].position(), pb.ref_arcs.back()));
  }
  for (int k = 1; k <= N; ++k) {
    const Matrix4& W = k < N ? cfg.Q : cfg.P;
    Projection foot;
    const Vector4 e0 = stage_error(lin.states[k], ref_window[k], env.line, lin.arc_hints[k], env.line ? pb.ref_arcs[k] : 0.0, &foot);
    Eigen::MatrixXd EG;
    if (env.line) {
      EG = pb.G[k];
      EG.row(1) = -std::sin(foot.heading) * pb.G[k].row(0) + std::cos(foot.heading) * pb.G[k].row(1);
    } else {
      EG = error_frame(ref_window[k].psi) * pb.G[k];
    }
    EG.row(0) = progress[k];
    const Eigen::MatrixXd WEG = W * EG;
    Huu += 2.0 * EG.transpose() * WEG;
    gu += 2.0 * WEG.transpose() * e0;
    pb.cost_offset += e0.dot(W * e0);
  }
  for (int k = 0; k < N; ++k) {
    const Vector2 u = lin.inputs[k].vec();
    Huu.block(2 * k, 2 * k, 2, 2) += 2.0 * cfg.R;
    gu.segment(2 * k, 2) += 2.0 * cfg.R * u;
    pb.cost_offset += u.dot(cfg.R * u);
  }
  for (int i = pb.n_inputs; i < n; ++i) {
    qp.H(i, i) = 2.0 * cfg.slack_weight;
    qp.g(i) = cfg.slack_weight;
  }
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();

  // bounds
  qp.lb = Eigen::VectorXd::Zero(n);
  qp.ub = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  for (int k = 0; k < N; ++k) {
    const ControlInput& u = lin.inputs[k];
    qp.lb(2 * k) = veh.a_min - u.a;
    qp.ub(2 * k) = veh.a_max - u.a;
    qp.lb(2 * k + 1) = -veh.delta_max - u.delta;
    qp.ub(2 * k + 1) = veh.delta_max - u.delta;
  }

  // rows
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  const double rates[2] = {cfg.rate_a, cfg.rate_delta};
  for (int k = 0; k < N; ++k) {
    for (int c = 0; c < 2; ++c) {
      if (!std::isfinite(rates[c])) continue;
      double prev_nominal = 0;
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
      r(2 * k + c) = 1.0;
      if (k == 0) {
        if (!memory.applied) continue;
        prev_nominal = memory.applied->vec()(c);
      } else {
        r(2 * (k - 1) + c) = -1.0;
        prev_nominal = lin.inputs[k - 1].vec()(c);
      }
      const double diff = lin.inputs[k].vec()(c) - prev_nominal;
      rows.push_back(r);
      rhs.push_back(rates[c] - diff);
      rows.push_back(-r);
      rhs.push_back(rates[c] + diff);
    }
  }
  pb.first_barrier_row = static_cast<int>(rows.size());

  auto add_barrier = [&](const StageRow& row, int k, int slack) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
    r.head(pb.n_inputs) = row.coeff_x.transpose() * pb.G[k];
    r.segment(2 * k, 2) += row.coeff_u.transpose();
    r(pb.n_inputs + slack) = -1.0;
    rows.push_back(r);
    rhs.push_back(row.rhs);
  };
  int slack = 0;
  for (int k = 0; k < N; ++k) {
    const double tau = k * cfg.dt;
    if (env.lead) {
      const BarrierEvaluation now = acc_barrier(lin.states[k], env.lead->predict(tau).s, *env.line, setup.acc, lin.arc_hints[k]);
      const BarrierEvaluation next =
          acc_barrier(lin.states[k + 1], env.lead->predict(tau + cfg.dt).s, *env.line, setup.acc, lin.arc_hints[k + 1]);
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
      r.head(pb.n_inputs) = -(next.grad_x.transpose() * Gp[k + 1] - (1.0 - setup.acc.gamma) * now.grad_x.transpose() * Gp[k]);
      r(pb.n_inputs + slack++) = -1.0;
      rows.push_back(r);
      rhs.push_back(discrete_cbf_residual(now.value, next.value, setup.acc.gamma));
    }
    for (const Obstacle& obs : env.obstacles) {
      const StageRow row = c3bf_constraint_row(lin.states[k], lin.states[k + 1], obs.predict(tau),
                                               obs.predict(tau + cfg.dt), lin.jacs[k], setup.c3bf);
      add_barrier(row, k, slack++);
    }
  }

  qp.A.resize(static_cast<Eigen::Index>(rows.size()), n);
  qp.b.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    qp.A.row(static_cast<Eigen::Index>(i)) = rows[i];
    qp.b(static_cast<Eigen::Index>(i)) = rhs[i];
  }
  return pb;
}

MpcSolution unpack(const MpcProblem& pb, const QpSolution& sol, const std::vector<VehicleState>& ref_window,
                   const ControllerSetup& setup)
{
  const MpcConfig& cfg = setup.mpc;
  const int N = cfg.N;
  MpcSolution out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  const Eigen::VectorXd du = sol.z.head(pb.n_inputs);
  for (int k = 0; k < N; ++k) out.inputs.push_back(ControlInput::from_vec(pb.lin.inputs[k].vec() + du.segment(2 * k, 2)));
  for (int k = 1; k <= N; ++k) out.states.push_back(VehicleState::from_vec(pb.lin.states[k].vec() + pb.G[k] * du));
  for (int i = 0; i < pb.n_slacks; ++i) out.slacks.push_back(std::max(sol.z(pb.n_inputs + i), 0.0));

  const int per_stage = N > 0 ? pb.n_slacks / N : 0;
  for (int k = 0; k < N; ++k) {
    const Matrix4& W = k + 1 < N ? cfg.Q : cfg.P;
    const Vector4 e =
        stage_error(out.states[k], ref_window[k + 1], pb.line, pb.lin.arc_hints[k + 1], pb.line ? pb.ref_arcs[k + 1] : 0.0);
    const Vector2 u = out.inputs[k].vec();
    double c = e.dot(W * e) + u.dot(cfg.R * u);
    for (int j = 0; j < per_stage; ++j) {
      const double s = out.slacks[k * per_stage + j];
      c += cfg.slack_weight * (s + s * s);
    }
    out.stage_costs.push_back(c);
  }
  return out;
}

std::vector<VehicleState> reference_window(const TargetTrajectory& traj, double t, double t_sh, const MpcConfig& cfg)
{
  std::vector<VehicleState> w;
  w.reserve(cfg.N + 1);
  for (int k = 0; k <= cfg.N; ++k) w.push_back(shifted_target(traj, t + k * cfg.dt, t_sh));
  return w;
}

ControllerOutput step_controller(const VehicleState& x0, double t, const TargetTrajectory& traj, double t_sh,
                                 const MpcEnvironment& env, const ControllerSetup& setup, ControllerMemory& memory,
                                 QpSolver& solver)
{
  const int N = setup.mpc.N;
  const std::vector<VehicleState> window = reference_window(traj, t, t_sh, setup.mpc);
  const MpcProblem pb = build_problem(x0, window, env, setup, memory);

  // warm start: zero deviation from the shifted nominal, multipliers shifted by one stage
  std::optional<QpSolution> warm;
  const Eigen::Index n = pb.qp.n(), m = pb.qp.m();
  if (memory.qp && memory.qp->z.size() == n && memory.qp->lam.size() == m) {
    QpSolution w;
    w.z = Eigen::VectorXd::Zero(n);
    w.lam = Eigen::VectorXd::Zero(m);
    w.mu = Eigen::VectorXd::Zero(n);
    const int per_stage = pb.n_slacks / N;
    const Eigen::Index shift_z = 2 * (N - 1), shift_s = per_stage * (N - 1);
    w.mu.head(shift_z) = memory.qp->mu.segment(2, shift_z);
    w.z.segment(pb.n_inputs, shift_s) = memory.qp->z.segment(pb.n_inputs + per_stage, shift_s);
    const Eigen::Index b0 = pb.first_barrier_row;
    if (m - b0 == pb.n_slacks) w.lam.segment(b0, shift_s) = memory.qp->lam.segment(b0 + per_stage, shift_s);
    warm = std::move(w);
  }

  solver.set_settings(setup.qp);
  const auto t0 = std::chrono::steady_clock::now();
  const QpSolution sol = solver.solve(pb.qp, warm ? &*warm : nullptr);
  const auto t1 = std::chrono::steady_clock::now();

  ControllerOutput out;
  out.solution = unpack(pb, sol, window, setup);
  out.solution.solve_time = std::chrono::duration<double>(t1 - t0).count();
  out.input = clamp_input(out.solution.inputs.front(), setup.vehicle);

  memory.inputs.assign(out.solution.inputs.begin() + 1, out.solution.inputs.end());
  memory.inputs.push_back(out.solution.inputs.back());
  for (auto& u : memory.inputs) u = clamp_input(u, setup.vehicle);
  memory.applied = out.input;
  memory.qp = sol;
  memory.arc_hint = pb.lin.arc_hints[1];
  return out;
}

}  // namespace tsg_acc
