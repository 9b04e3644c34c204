#pragma once

#include "tsg_acc/barrier.hpp"
#include "tsg_acc/road.hpp"

namespace tsg_acc {

struct AccCbfParams
{
  /// time headway [s]
  double time_headway{1.2};
  /// standstill distance [m]
  double standstill{5.0};
  /// discrete decay rate in (0, 1]
  double gamma{0.2};

  void validate() const;
};

/// Lead vehicle moving along the centerline.
struct LeadState
{
  double s{0};
  double v{0};
  double a{0};

  /// Constant-acceleration prediction, holding at standstill once stopped.
  LeadState predict(double tau) const;
};

/// Time-headway barrier h = gap - T_h v_ego - D_0.
double h_acc(double gap, double v_ego, const AccCbfParams& params);

/**
 * @brief Headway barrier with the along-path gap to a lead at arc length
 * `lead_s`; gradient w.r.t. the ego state.
 *
 * The ego arc length comes from projecting its position onto the centerline,
 * so ds/d(x, y) = t / (1 - kappa * lateral).
 */
BarrierEvaluation acc_barrier(const VehicleState& ego, double lead_s, const Centerline& line, const AccCbfParams& params,
                              double s_hint);

/**
 * @brief Linearized ACC condition between the stage state `ego` and its
 * nominal successor `ego_next` (lead at `lead_now`, `lead_next`).
 */
StageRow acc_constraint_row(const VehicleState& ego, const VehicleState& ego_next, double lead_now, double lead_next,
                            const StateJacobians& jac, const Centerline& line, const AccCbfParams& params, double s_hint);

}  // namespace tsg_acc
