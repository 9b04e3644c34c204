#include "tsg_acc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tsg_acc {

namespace {

constexpr double kPi = std::numbers::pi;

Vector4 f(const Vector4& x, const Vector2& u, const VehicleParams& p)
{
  const double beta = slip_angle(u(1), p);
  const double v = x(3);
  return {v * std::cos(x(2) + beta), v * std::sin(x(2) + beta), v * std::sin(beta) / p.l_r, u(0)};
}

}  // namespace

void VehicleParams::validate() const
{
  auto fail = [](const std::string& what) { throw std::invalid_argument("vehicle." + what); };
  if (!(l_f > 0)) fail("l_f must be > 0");
  if (!(l_r > 0)) fail("l_r must be > 0");
  if (!(a_min < 0)) fail("a_min must be < 0");
  if (!(a_max > 0)) fail("a_max must be > 0");
  if (!(delta_max > 0 && delta_max < kPi / 2)) fail("delta_max must lie in (0, pi/2)");
  if (!(v_max > 0)) fail("v_max must be > 0");
}

double wrap_angle(double a)
{
  double w = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double slip_angle(double delta, const VehicleParams& params)
{
  return std::atan(params.l_r * std::tan(delta) / params.wheelbase());
}

Vector4 derivative(const VehicleState& state, const ControlInput& input, const VehicleParams& params)
{
  return f(state.vec(), input.vec(), params);
}

ControlInput clamp_input(const ControlInput& input, const VehicleParams& params)
{
  return {std::clamp(input.a, params.a_min, params.a_max),
          std::clamp(input.delta, -params.delta_max, params.delta_max)};
}

VehicleState step(const VehicleState& state, const ControlInput& input, double dt, const VehicleParams& params)
{
  const Vector4 x = state.vec();
  const Vector2 u = input.vec();
  const Vector4 k1 = f(x, u, params);
  const Vector4 k2 = f(x + 0.5 * dt * k1, u, params);
  const Vector4 k3 = f(x + 0.5 * dt * k2, u, params);
  const Vector4 k4 = f(x + dt * k3, u, params);
  Vector4 xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  xn(3) = std::clamp(xn(3), 0.0, params.v_max);
  xn(2) = wrap_angle(xn(2));
  return VehicleState::from_vec(xn);
}

void continuous_jacobians(const Vector4& x, const Vector2& u, const VehicleParams& p, Matrix4& jx, Matrix42& ju)
{
  const double delta = u(1);
  const double L = p.wheelbase();
  const double q = p.l_r * std::tan(delta) / L;
  const double beta = std::atan(q);
  const double dbeta = (p.l_r / L) / (std::cos(delta) * std::cos(delta)) / (1.0 + q * q);
  const double v = x(3);
  const double c = std::cos(x(2) + beta);
  const double s = std::sin(x(2) + beta);

  jx.setZero();
  jx(0, 2) = -v * s;
  jx(0, 3) = c;
  jx(1, 2) = v * c;
  jx(1, 3) = s;
  jx(2, 3) = std::sin(beta) / p.l_r;

  ju.setZero();
  ju(0, 1) = -v * s * dbeta;
  ju(1, 1) = v * c * dbeta;
  ju(2, 1) = v * std::cos(beta) * dbeta / p.l_r;
  ju(3, 0) = 1.0;
}

StateJacobians linearize(const VehicleState& state, const ControlInput& input, double dt, const VehicleParams& params)
{
  const Vector4 x = state.vec();
  const Vector2 u = input.vec();
  const Matrix4 I = Matrix4::Identity();

  Matrix4 jx;
  Matrix42 ju;

  // stage 1
  const Vector4 k1 = f(x, u, params);
  continuous_jacobians(x, u, params, jx, ju);
  const Matrix4 dk1x = jx;
  const Matrix42 dk1u = ju;
  // stage 2
  const Vector4 x2 = x + 0.5 * dt * k1;
  const Vector4 k2 = f(x2, u, params);
  continuous_jacobians(x2, u, params, jx, ju);
  const Matrix4 dk2x = jx * (I + 0.5 * dt * dk1x);
  const Matrix42 dk2u = jx * (0.5 * dt * dk1u) + ju;
  // stage 3
  const Vector4 x3 = x + 0.5 * dt * k2;
  const Vector4 k3 = f(x3, u, params);
  continuous_jacobians(x3, u, params, jx, ju);
  const Matrix4 dk3x = jx * (I + 0.5 * dt * dk2x);
  const Matrix42 dk3u = jx * (0.5 * dt * dk2u) + ju;
  // stage 4
  const Vector4 x4 = x + dt * k3;
  const Vector4 k4 = f(x4, u, params);
  continuous_jacobians(x4, u, params, jx, ju);
  const Matrix4 dk4x = jx * (I + dt * dk3x);
  const Matrix42 dk4u = jx * (dt * dk3u) + ju;

  StateJacobians out;
  out.A = I + dt / 6.0 * (dk1x + 2.0 * dk2x + 2.0 * dk3x + dk4x);
  out.B = dt / 6.0 * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u);

  // The speed clamp is flat outside [0, v_max].
  const double v_raw = x(3) + dt / 6.0 * (k1(3) + 2.0 * k2(3) + 2.0 * k3(3) + k4(3));
  if (v_raw < 0.0 || v_raw > params.v_max) {
    out.A.row(3).setZero();
    out.B.row(3).setZero();
  }

  const Vector4 xn = step(state, input, dt, params).vec();
  out.c = xn - out.A * x - out.B * u;
  return out;
}

}  // namespace tsg_acc
