#include "tsg_acc/barrier.hpp"

namespace tsg_acc {

BarrierEvaluation through_step(const BarrierEvaluation& at_next, const StateJacobians& jac)
{
  BarrierEvaluation out;
  out.value = at_next.value;
  out.grad_x = jac.A.transpose() * at_next.grad_x;
  out.grad_u = jac.B.transpose() * at_next.grad_x;
  return out;
}

StageRow cbf_stage_row(const BarrierEvaluation& now, const BarrierEvaluation& next, const StateJacobians& jac, double gamma)
{
  StageRow row;
  row.coeff_x = -(jac.A.transpose() * next.grad_x - (1.0 - gamma) * now.grad_x);
  row.coeff_u = -(jac.B.transpose() * next.grad_x);
  row.rhs = discrete_cbf_residual(now.value, next.value, gamma);
  return row;
}

}  // namespace tsg_acc
