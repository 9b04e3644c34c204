#include "tsg_acc/c3bf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsg_acc {

namespace {

// Map gradients w.r.t. (p, w) onto the ego state.
Vector4 chain_to_ego(const VehicleState& ego, const Vector2& dh_dp, const Vector2& dh_dw)
{
  const double c = std::cos(ego.psi);
  const double s = std::sin(ego.psi);
  Vector4 g;
  g(0) = -dh_dp(0);
  g(1) = -dh_dp(1);
  // w = v_obs - v (c, s)
  g(2) = dh_dw.dot(Vector2{ego.v * s, -ego.v * c});
  g(3) = dh_dw.dot(Vector2{-c, -s});
  return g;
}

BarrierEvaluation outside(const VehicleState& ego, const Vector2& p, const Vector2& w, double r, double eps)
{
  const double root = std::sqrt(std::max(p.squaredNorm() - r * r, 0.0));
  const double speed = std::sqrt(w.squaredNorm() + eps * eps);
  BarrierEvaluation out;
  out.value = p.dot(w) + speed * root;
  const Vector2 dh_dp = root > 0 ? Vector2(w + speed * p / root) : w;
  Vector2 dh_dw = p;
  if (speed > 0) dh_dw += w / speed * root;
  out.grad_x = chain_to_ego(ego, dh_dp, dh_dw);
  return out;
}

BarrierEvaluation inside(const VehicleState& ego, const Vector2& p, const Vector2& w, double r, double slope)
{
  const double norm = p.norm();
  const double n = std::max(norm, 1e-6);
  BarrierEvaluation out;
  out.value = slope * (norm - r) + r * p.dot(w) / n;
  Vector2 dh_dp = slope * p / n + r * w / n;
  if (norm > 1e-6) dh_dp -= r * p.dot(w) * p / (n * n * n);
  const Vector2 dh_dw = r * p / n;
  out.grad_x = chain_to_ego(ego, dh_dp, dh_dw);
  return out;
}

}  // namespace

void Obstacle::validate() const
{
  if (!(radius > 0)) throw std::invalid_argument("obstacle radius must be > 0");
  if (!position.allFinite() || !velocity.allFinite()) throw std::invalid_argument("obstacle state must be finite");
}

void C3bfParams::validate() const
{
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("c3bf.gamma must lie in (0, 1]");
  if (!(eps_v > 0)) throw std::invalid_argument("c3bf.eps_v must be > 0");
  if (!(inside_slope > 0)) throw std::invalid_argument("c3bf.inside_slope must be > 0");
}

BarrierEvaluation h_c3bf(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params)
{
  const Vector2 p = obs.position - ego.position();
  if (p.norm() <= obs.radius) return relaxed_h(ego, obs, params);
  return outside(ego, p, obs.velocity - ego_velocity(ego), obs.radius, 0.0);
}

BarrierEvaluation relaxed_h(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params)
{
  const Vector2 p = obs.position - ego.position();
  const Vector2 w = obs.velocity - ego_velocity(ego);
  if (p.norm() <= obs.radius) return inside(ego, p, w, obs.radius, params.inside_slope);
  return outside(ego, p, w, obs.radius, params.eps_v);
}

BarrierEvaluation relaxed_h_outer(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params)
{
  return outside(ego, obs.position - ego.position(), obs.velocity - ego_velocity(ego), obs.radius, params.eps_v);
}

BarrierEvaluation relaxed_h_inner(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params)
{
  return inside(ego, obs.position - ego.position(), obs.velocity - ego_velocity(ego), obs.radius, params.inside_slope);
}

bool in_collision_cone(const VehicleState& ego, const Obstacle& obs, const C3bfParams& params)
{
  return h_c3bf(ego, obs, params).value < 0.0;
}

StageRow c3bf_constraint_row(const VehicleState& ego, const VehicleState& ego_next, const Obstacle& obs_now,
                             const Obstacle& obs_next, const StateJacobians& jac, const C3bfParams& params)
{
  return cbf_stage_row(relaxed_h(ego, obs_now, params), relaxed_h(ego_next, obs_next, params), jac, params.gamma);
}

}  // namespace tsg_acc
