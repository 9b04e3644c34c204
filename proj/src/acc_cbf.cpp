#include "tsg_acc/acc_cbf.hpp"

#include <cmath>
#include <stdexcept>

namespace tsg_acc {

void AccCbfParams::validate() const
{
  if (!(time_headway >= 0)) throw std::invalid_argument("acc.time_headway must be >= 0");
  if (!(standstill > 0)) throw std::invalid_argument("acc.standstill must be > 0");
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("acc.gamma must lie in (0, 1]");
}

LeadState LeadState::predict(double tau) const
{
  if (a < 0 && v + a * tau < 0) {
    const double t_stop = -v / a;
    return {s + 0.5 * v * t_stop, 0.0, 0.0};
  }
  return {s + v * tau + 0.5 * a * tau * tau, v + a * tau, a};
}

double h_acc(double gap, double v_ego, const AccCbfParams& params)
{
  return gap - params.time_headway * v_ego - params.standstill;
}

BarrierEvaluation acc_barrier(const VehicleState& ego, double lead_s, const Centerline& line, const AccCbfParams& params,
                              double s_hint)
{
  const Projection proj = line.project(ego.position(), s_hint);
  BarrierEvaluation out;
  out.value = h_acc(lead_s - proj.s, ego.v, params);

  double scale = 1.0 - proj.curvature * proj.lateral;
  if (scale < 0.1) scale = 0.1;
  const double inside = proj.s > 0.0 && proj.s < line.length() ? 1.0 : 0.0;
  out.grad_x(0) = -inside * std::cos(proj.heading) / scale;
  out.grad_x(1) = -inside * std::sin(proj.heading) / scale;
  out.grad_x(2) = 0.0;
  out.grad_x(3) = -params.time_headway;
  return out;
}

StageRow acc_constraint_row(const VehicleState& ego, const VehicleState& ego_next, double lead_now, double lead_next,
                            const StateJacobians& jac, const Centerline& line, const AccCbfParams& params, double s_hint)
{
  const BarrierEvaluation now = acc_barrier(ego, lead_now, line, params, s_hint);
  const BarrierEvaluation next = acc_barrier(ego_next, lead_next, line, params, s_hint);
  return cbf_stage_row(now, next, jac, params.gamma);
}

}  // namespace tsg_acc
