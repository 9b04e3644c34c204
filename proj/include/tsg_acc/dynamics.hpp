#pragma once

/**
 * @file
 * @brief Kinematic bicycle model of the ego vehicle.
 *
 * State  (x, y, psi, v): CG position [m], heading [rad], speed [m/s].
 * Input  (a, delta):     longitudinal acceleration [m/s^2], front steering [rad].
 *
 *   beta   = atan(l_r tan(delta) / (l_f + l_r))
 *   x_dot  = v cos(psi + beta)
 *   y_dot  = v sin(psi + beta)
 *   psi_dot= v sin(beta) / l_r
 *   v_dot  = a
 */

#include <Eigen/Core>

namespace tsg_acc {

using Vector2 = Eigen::Vector2d;
using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;
using Matrix42 = Eigen::Matrix<double, 4, 2>;

struct VehicleState
{
  double x{0};
  double y{0};
  double psi{0};
  double v{0};

  Vector4 vec() const { return {x, y, psi, v}; }
  static VehicleState from_vec(const Vector4& s) { return {s(0), s(1), s(2), s(3)}; }
  Vector2 position() const { return {x, y}; }
};

struct ControlInput
{
  double a{0};
  double delta{0};

  Vector2 vec() const { return {a, delta}; }
  static ControlInput from_vec(const Vector2& u) { return {u(0), u(1)}; }
};

struct VehicleParams
{
  double l_f{1.4};
  double l_r{1.4};
  double a_min{-6.0};
  double a_max{3.0};
  double delta_max{0.5};
  double v_max{40.0};

  double wheelbase() const { return l_f + l_r; }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Discrete affine model x+ = A x + B u + c around one linearization point.
struct StateJacobians
{
  Matrix4 A{Matrix4::Identity()};
  Matrix42 B{Matrix42::Zero()};
  Vector4 c{Vector4::Zero()};
};

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// Signed smallest difference a - b, wrapped to (-pi, pi].
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

double slip_angle(double delta, const VehicleParams& params);

Vector4 derivative(const VehicleState& state, const ControlInput& input, const VehicleParams& params);

/// Clamp the input to the actuator box.
ControlInput clamp_input(const ControlInput& input, const VehicleParams& params);

/**
 * @brief One classical RK4 step with the input held constant, followed by
 * clamping v to [0, v_max] and wrapping psi.
 */
VehicleState step(const VehicleState& state, const ControlInput& input, double dt, const VehicleParams& params);

/**
 * @brief Exact Jacobians of `step` (chain rule through the RK4 stages).
 *
 * c is chosen so that A x + B u + c reproduces step(x, u) at the point.
 */
StateJacobians linearize(const VehicleState& state, const ControlInput& input, double dt, const VehicleParams& params);

/// Continuous-time Jacobians of `derivative`.
void continuous_jacobians(const Vector4& x, const Vector2& u, const VehicleParams& params, Matrix4& jx, Matrix42& ju);

}  // namespace tsg_acc
