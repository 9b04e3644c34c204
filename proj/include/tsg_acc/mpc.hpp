#pragma once

/**
 * @file
 * @brief Receding-horizon tracking controller with headway and collision-cone
 * barrier rows.
 *
 * The program is linearized around a nominal rollout (the shifted previous
 * solution, or a feed-forward guess from the reference on the first call) and
 * condensed: the decision vector is the stacked input deviations followed by
 * one slack per barrier row.
 */

#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tsg_acc/acc_cbf.hpp"
#include "tsg_acc/c3bf.hpp"
#include "tsg_acc/qp.hpp"
#include "tsg_acc/road.hpp"

namespace tsg_acc {

class DimensionMismatch : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

using Matrix2 = Eigen::Matrix2d;

struct MpcConfig
{
  int N{10};
  double dt{0.1};
  /// weight on (longitudinal, lateral, heading, speed) error in the reference frame
  Matrix4 Q{Vector4(1.0, 4.0, 2.0, 1.0).asDiagonal()};
  Matrix2 R{Vector2(0.1, 1.0).asDiagonal()};
  Matrix4 P{Vector4(1.0, 4.0, 2.0, 1.0).asDiagonal()};
  double slack_weight{1e4};
  /// max change of (a, delta) between consecutive inputs
  double rate_a{std::numeric_limits<double>::infinity()};
  double rate_delta{std::numeric_limits<double>::infinity()};

  void validate() const;
};

/// Everything the controller needs besides the horizon settings.
struct ControllerSetup
{
  MpcConfig mpc;
  VehicleParams vehicle;
  AccCbfParams acc;
  C3bfParams c3bf;
  QpSettings qp;

  void validate() const;
};

/// Surroundings at the current time; the lead is optional.
struct MpcEnvironment
{
  const Centerline* line{nullptr};
  std::optional<LeadState> lead;
  std::vector<Obstacle> obstacles;
};

/// Nominal trajectory and its step Jacobians.
struct Linearization
{
  std::vector<ControlInput> inputs;   // N
  std::vector<VehicleState> states;   // N + 1, states[0] = x0
  std::vector<StateJacobians> jacs;   // N
  std::vector<double> arc_hints;      // N + 1 projected arc lengths
};

/// Condensed program plus what is needed to map its solution back.
struct MpcProblem
{
  DenseQp qp;
  Linearization lin;
  /// G[k] maps stacked input deviations to the state deviation at stage k (4 x 2N)
  std::vector<Eigen::MatrixXd> G;
  double cost_offset{0};
  int n_inputs{0};
  int n_slacks{0};
  /// index of the first barrier row in qp.A (rows before it are rate limits)
  int first_barrier_row{0};
  bool has_acc{false};
  std::size_t n_obstacles{0};
  const Centerline* line{nullptr};
  /// arc length of each reference state when a centerline is given
  std::vector<double> ref_arcs;
};

struct MpcSolution
{
  std::vector<ControlInput> inputs;
  /// x_1..x_N from the linearized dynamics
  std::vector<VehicleState> states;
  /// grouped per stage: [acc, obs_0, obs_1, ...] for stage 0, then stage 1, ...
  std::vector<double> slacks;
  std::vector<double> stage_costs;
  QpStatus status{QpStatus::MaxIter};
  int iterations{0};
  double solve_time{0};

  bool degraded() const { return status != QpStatus::Optimal; }
  double max_slack() const;
};

/// Warm-start and rate-limit state carried between calls.
struct ControllerMemory
{
  std::vector<ControlInput> inputs;
  std::optional<ControlInput> applied;
  std::optional<QpSolution> qp;
  std::optional<double> arc_hint;

  void reset() { *this = ControllerMemory{}; }
};

/// Rollout of the nominal inputs from x0 (inputs clamped to the bounds).
Linearization linearize_along(const VehicleState& x0, std::vector<ControlInput> inputs, const Centerline* line,
                              double s_hint, const MpcConfig& cfg, const VehicleParams& vehicle);

/// Feed-forward inputs that reproduce the reference window's speed and turn rate.
std::vector<ControlInput> reference_inputs(const std::vector<VehicleState>& ref_window, const MpcConfig& cfg,
                                           const VehicleParams& vehicle);

/**
 * @brief Assemble the condensed QP.
 *
 * `ref_window` holds N + 1 target states for stages 0..N. Rows are ordered:
 * input-rate limits, then per stage the ACC row (if a lead is present)
 * followed by one row per obstacle.
 */
MpcProblem build_problem(const VehicleState& x0, const std::vector<VehicleState>& ref_window, const MpcEnvironment& env,
                         const ControllerSetup& setup, const ControllerMemory& memory);

/// Map a QP solution back to inputs, predicted states, slacks and costs.
MpcSolution unpack(const MpcProblem& problem, const QpSolution& sol, const std::vector<VehicleState>& ref_window,
                   const ControllerSetup& setup);

/// Window of shifted target states t + k dt + t_sh, k = 0..N.
std::vector<VehicleState> reference_window(const TargetTrajectory& traj, double t, double t_sh, const MpcConfig& cfg);

struct ControllerOutput
{
  ControlInput input;
  MpcSolution solution;
};

/**
 * @brief One receding-horizon step: build, solve, apply the clamped first
 * input and shift the memory. MaxIter is reported through
 * MpcSolution::degraded() with the best iterate still applied.
 */
ControllerOutput step_controller(const VehicleState& x0, double t, const TargetTrajectory& traj, double t_sh,
                                 const MpcEnvironment& env, const ControllerSetup& setup, ControllerMemory& memory,
                                 QpSolver& solver);

}  // namespace tsg_acc
