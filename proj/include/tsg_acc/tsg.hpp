#pragma once

/**
 * @file
 * @brief Time shift governor: delays the target reference, t -> t + t_sh with
 * t_sh <= 0, so that the constrained closed loop stays admissible.
 */

#include <limits>

#include "tsg_acc/mpc.hpp"

namespace tsg_acc {

struct TsgSettings
{
  bool enabled{true};
  /// most negative shift [s]
  double t_sh_min{-10.0};
  double bisection_tol{0.01};
  int max_bisections{30};
  /// closed-loop steps simulated per admissibility check
  int horizon{50};
  double update_period{0.1};
  double safety_margin{0.0};
  /// first step of the search toward t_sh_min when the current shift fails (doubled each time)
  double fallback_step{0.5};
  /// slack level above which a predicted solve counts as violating
  double slack_tol{1e-6};
  /// numerical allowance below safety_margin for barrier values
  double barrier_tol{1e-6};

  /// `mpc_horizon` is N of the controller; the check horizon must cover it.
  void validate(int mpc_horizon) const;
};

struct TsgState
{
  double t_sh{0.0};
  double last_update_time{-std::numeric_limits<double>::infinity()};
  /// set when no shift in [t_sh_min, 0] was admissible at the last update
  bool saturated{false};
  /// admissibility checks spent in the last update
  int checks{0};
};

/// Outcome of one admissibility check, with the first failure for diagnostics.
struct Admissibility
{
  bool admissible{true};
  int failed_step{-1};
  double min_barrier{std::numeric_limits<double>::infinity()};
  /// distance to the nearest obstacle disc
  double min_clearance{std::numeric_limits<double>::infinity()};
  double max_slack{0};
  bool degraded{false};
};

/**
 * @brief Simulate the closed loop (controller and plant, lead on
 * constant-acceleration prediction, obstacles at constant velocity) for
 * settings.horizon steps with the shift held at `t_sh`.
 *
 * The controller memory is copied; the caller's is not touched. A step fails
 * when a barrier drops below the safety margin, the ego enters an obstacle
 * disc, a slack reaches slack_tol, or the solve is degraded. Stops at the
 * first failure.
 */
Admissibility check_admissible(const VehicleState& x0, double t, double t_sh, const TargetTrajectory& traj,
                               const MpcEnvironment& env, const ControllerSetup& setup, const ControllerMemory& memory,
                               const TsgSettings& settings);

bool is_admissible(const VehicleState& x0, double t, double t_sh, const TargetTrajectory& traj, const MpcEnvironment& env,
                   const ControllerSetup& setup, const ControllerMemory& memory, const TsgSettings& settings);

/**
 * @brief Governor update. Keeps the state unchanged between update periods.
 *
 * Zero is tried first. Otherwise, if the current shift is admissible, the
 * boundary is bisected between it and 0. If not, the shift moves toward
 * t_sh_min in doubling steps until a candidate passes, then the bracket is
 * bisected. When even t_sh_min fails the result is t_sh_min with `saturated`.
 */
TsgState update_shift(const TsgState& state, const VehicleState& x0, double t, const TargetTrajectory& traj,
                      const MpcEnvironment& env, const ControllerSetup& setup, const ControllerMemory& memory,
                      const TsgSettings& settings);

}  // namespace tsg_acc
