#pragma once

/**
 * @file
 * @brief Collision cone barrier for moving circular obstacles.
 *
 * With p = p_obs - p_ego and w = v_obs - v_ego (ego velocity along its heading)
 *
 *   h = <p, w> + |w| sqrt(|p|^2 - r^2)
 *
 * is nonnegative iff w points outside the cone of relative velocities that
 * lead into the disc of radius r. The relaxed form replaces |w| by
 * sqrt(|w|^2 + eps_v^2) and continues linearly inside the disc,
 *
 *   h_in = slope (|p| - r) + r <p/|p|, w>,
 *
 * which meets the outer branch on |p| = r.
 */

#include <cmath>

#include "tsg_acc/barrier.hpp"

namespace tsg_acc {

struct Obstacle
{
  Vector2 position{Vector2::Zero()};
  Vector2 velocity{Vector2::Zero()};
  /// combined obstacle and ego footprint radius [m]
  double radius{1.0};

  /// Constant-velocity prediction.
  Obstacle predict(double tau) const { return {position + tau * velocity, velocity, radius}; }
  void validate() const;
};

struct C3bfParams
{
  double gamma{0.3};
  double eps_v{0.5};
  double inside_slope{10.0};

  void validate() const;
};

/// Ego velocity vector used by the cone (speed along the heading).
inline Vector2 ego_velocity(const VehicleState& s) { return {s.v * std::cos(s.psi), s.v * std::sin(s.psi)}; }

/// Unregularized collision cone barrier; delegates to `relaxed_h` inside the disc.
BarrierEvaluation h_c3bf(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params);

/// Relaxed barrier, finite value and gradient everywhere.
BarrierEvaluation relaxed_h(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params);

/// The two branches of `relaxed_h`, evaluated regardless of |p| (seam checks).
BarrierEvaluation relaxed_h_outer(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params);
BarrierEvaluation relaxed_h_inner(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params);

/// True iff the relative velocity lies strictly inside the collision cone (h_c3bf < 0 outside the disc).
bool in_collision_cone(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params);

/// Linearized relaxed C3BF condition; `obs_now` and `obs_next` are the
/// obstacle at the stage and at the following stage.
StageRow c3bf_constraint_row(const VehicleState& ego, const VehicleState& ego_next, const Obstacle& obs_now,
                             const Obstacle& obs_next, const StateJacobians& jac, const C3bfParams& params);

}  // namespace tsg_acc
