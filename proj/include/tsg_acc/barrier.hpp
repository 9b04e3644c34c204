#pragma once

#include <optional>

#include "tsg_acc/dynamics.hpp"

namespace tsg_acc {

/// Barrier value with its gradient w.r.t. the ego state and, when computed
/// through a one-step prediction, w.r.t. the input.
struct BarrierEvaluation
{
  double value{0};
  Vector4 grad_x{Vector4::Zero()};
  Vector2 grad_u{Vector2::Zero()};
};

/// Discrete CBF residual h_{k+1} - (1 - gamma) h_k; nonnegative iff the condition holds.
inline double discrete_cbf_residual(double h_k, double h_k1, double gamma) { return h_k1 - (1.0 - gamma) * h_k; }

/**
 * @brief Evaluate a barrier at x+ = step(x, u) and push the gradient back onto u.
 *
 * `at_next` must be the evaluation at the predicted state; `jac` the step
 * Jacobians at (x, u). The returned grad_x is d h(x+)/dx, grad_u d h(x+)/du.
 */
BarrierEvaluation through_step(const BarrierEvaluation& at_next, const StateJacobians& jac);

/**
 * @brief Linearized discrete CBF condition for one stage.
 *
 * In terms of the stage deviations (dx, du) from the linearization point and
 * a slack s >= 0 the condition h(x_{k+1}) - (1 - gamma) h(x_k) + s >= 0 reads
 *
 *   coeff_x . dx + coeff_u . du - s <= rhs
 */
struct StageRow
{
  Vector4 coeff_x{Vector4::Zero()};
  Vector2 coeff_u{Vector2::Zero()};
  double rhs{0};

  /// Linear prediction of the residual h_{k+1} - (1-gamma) h_k at (dx, du).
  double predicted_residual(const Vector4& dx, const Vector2& du) const { return rhs - coeff_x.dot(dx) - coeff_u.dot(du); }
};

/**
 * @brief Build the stage row from the barrier at the linearization state
 * (`now`, with grad_x) and at the nominal successor (`next`, with grad_x).
 */
StageRow cbf_stage_row(const BarrierEvaluation& now, const BarrierEvaluation& next, const StateJacobians& jac, double gamma);

}  // namespace tsg_acc
