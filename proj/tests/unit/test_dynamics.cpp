#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tsg_acc/dynamics.hpp"

using namespace tsg_acc;

namespace {

VehicleParams symmetric(double half = 1.5)
{
  VehicleParams p;
  p.l_f = half;
  p.l_r = half;
  return p;
}

// Closed-form position after time T on the constant-turn circle (a = 0).
Vector2 constant_turn(const VehicleState& s0, double delta, double T, const VehicleParams& p)
{
  const double beta = std::atan(p.l_r * std::tan(delta) / (p.l_f + p.l_r));
  const double rate = s0.v * std::sin(beta) / p.l_r;
  const double radius = s0.v / rate;
  const double th0 = s0.psi + beta;
  return {s0.x + radius * (std::sin(th0 + rate * T) - std::sin(th0)),
          s0.y - radius * (std::cos(th0 + rate * T) - std::cos(th0))};
}

Vector2 rollout_error(double dt, double T)
{
  const VehicleParams p = symmetric();
  const VehicleState s0{0, 0, 0.3, 10};
  VehicleState s = s0;
  const int steps = static_cast<int>(std::lround(T / dt));
  for (int i = 0; i < steps; ++i) s = step(s, {0.0, 0.2}, dt, p);
  return s.position() - constant_turn(s0, 0.2, T, p);
}

struct FdJac
{
  Matrix4 A;
  Matrix42 B;
};

FdJac finite_difference(const VehicleState& s, const ControlInput& u, double dt, const VehicleParams& p, double h)
{
  auto diff = [](const VehicleState& a, const VehicleState& b) {
    Vector4 d = a.vec() - b.vec();
    d(2) = angle_diff(a.psi, b.psi);
    return d;
  };
  FdJac out;
  for (int i = 0; i < 4; ++i) {
    Vector4 xp = s.vec(), xm = s.vec();
    xp(i) += h;
    xm(i) -= h;
    out.A.col(i) = diff(step(VehicleState::from_vec(xp), u, dt, p), step(VehicleState::from_vec(xm), u, dt, p)) / (2 * h);
  }
  for (int i = 0; i < 2; ++i) {
    Vector2 up = u.vec(), um = u.vec();
    up(i) += h;
    um(i) -= h;
    out.B.col(i) = diff(step(s, ControlInput::from_vec(up), dt, p), step(s, ControlInput::from_vec(um), dt, p)) / (2 * h);
  }
  return out;
}

}  // namespace

TEST_CASE("slip angle")
{
  const VehicleParams p = symmetric();
  CHECK(slip_angle(0.0, p) == 0.0);
  CHECK(slip_angle(0.1, p) == doctest::Approx(0.05012531307317144).epsilon(1e-14));
  for (double d : {0.01, 0.2, 0.45}) {
    CHECK(slip_angle(-d, p) == -slip_angle(d, p));
    CHECK(slip_angle(d, p) > 0.0);
  }
}

TEST_CASE("derivative")
{
  const VehicleParams p = symmetric();
  SUBCASE("stationary vehicle")
  {
    for (double d : {-0.4, 0.0, 0.3}) CHECK(derivative({1, 2, 0.5, 0}, {0, d}, p).isZero(0.0));
  }
  SUBCASE("straight line")
  {
    const Vector4 f = derivative({0, 0, 0, 10}, {0, 0}, p);
    CHECK(f(0) == 10.0);
    CHECK(f(1) == 0.0);
    CHECK(f(2) == 0.0);
    CHECK(f(3) == 0.0);
  }
  SUBCASE("yaw rate against a fine integrator")
  {
    const Vector4 f = derivative({0, 0, 0, 10}, {0, 0.1}, p);
    CHECK(f(2) == doctest::Approx(0.3340288356159402).epsilon(1e-14));
    VehicleState s{0, 0, 0, 10};
    for (int i = 0; i < 10; ++i) s = step(s, {0, 0.1}, 1e-4, p);
    CHECK(s.psi / 1e-3 == doctest::Approx(f(2)).epsilon(1e-9));
  }
}

TEST_CASE("rk4 step")
{
  const VehicleParams p = symmetric();
  SUBCASE("constant velocity")
  {
    const VehicleState s = step({0, 0, 0, 10}, {0, 0}, 0.1, p);
    CHECK(s.x == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.y == 0.0);
    CHECK(s.psi == 0.0);
    CHECK(s.v == 10.0);
  }
  SUBCASE("constant acceleration")
  {
    const VehicleState s = step({0, 0, 0, 10}, {1, 0}, 0.1, p);
    CHECK(s.v == doctest::Approx(10.1).epsilon(1e-15));
    CHECK(s.x == doctest::Approx(1.005).epsilon(1e-15));
  }
  SUBCASE("constant turn circle")
  {
    CHECK(rollout_error(0.01, 1.0).norm() < 1e-6);
  }
  SUBCASE("order of accuracy")
  {
    double prev = rollout_error(0.2, 4.0).norm();
    for (double dt : {0.1, 0.05}) {
      const double err = rollout_error(dt, 4.0).norm();
      if (err < 1e-11) break;
      CHECK(prev / err >= 8.0);
      prev = err;
    }
  }
  SUBCASE("clamping and wrapping")
  {
    const VehicleState top = step({0, 0, 0, p.v_max}, {2.0, 0}, 0.1, p);
    CHECK(top.v == p.v_max);
    const VehicleState stop = step({0, 0, 0, 0.1}, {-5.0, 0}, 0.1, p);
    CHECK(stop.v == 0.0);
    const VehicleState wrapped = step({0, 0, 3.1, 10}, {0, 0.4}, 0.1, p);
    CHECK(wrapped.psi < 0.0);
    CHECK(wrapped.psi > -std::numbers::pi);
  }
  SUBCASE("determinism")
  {
    const VehicleState a = step({1.3, -2.1, 0.7, 12.3}, {0.4, -0.12}, 0.1, p);
    const VehicleState b = step({1.3, -2.1, 0.7, 12.3}, {0.4, -0.12}, 0.1, p);
    CHECK(a.vec() == b.vec());
  }
}

TEST_CASE("wrap angle")
{
  CHECK(wrap_angle(std::numbers::pi) == std::numbers::pi);
  CHECK(wrap_angle(-std::numbers::pi) == std::numbers::pi);
  CHECK(wrap_angle(3 * std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(angle_diff(3.1, -3.1) == doctest::Approx(6.2 - 2 * std::numbers::pi));
}

TEST_CASE("linearization")
{
  const VehicleParams p = symmetric();
  SUBCASE("aligned point")
  {
    const double dt = 0.1;
    const StateJacobians J = linearize({0, 0, 0, 10}, {0, 0}, dt, p);
    CHECK(J.A(0, 3) == doctest::Approx(dt));
    CHECK(J.A(1, 2) == doctest::Approx(10 * dt));
    CHECK(J.B(3, 0) == doctest::Approx(dt));
  }
  SUBCASE("vanishing step")
  {
    const StateJacobians J = linearize({1, 2, 0.3, 12}, {0.5, 0.2}, 1e-9, p);
    CHECK((J.A - Matrix4::Identity()).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(J.B.cwiseAbs().maxCoeff() < 1e-7);
  }
  SUBCASE("affine term reproduces the step")
  {
    const VehicleState s{3, -1, 0.4, 8};
    const ControlInput u{0.7, -0.15};
    const StateJacobians J = linearize(s, u, 0.1, p);
    const Vector4 pred = J.A * s.vec() + J.B * u.vec() + J.c;
    CHECK((pred - step(s, u, 0.1, p).vec()).norm() < 1e-12);
  }
  SUBCASE("finite-difference oracle on random points")
  {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(-50, 50), hdg(-2.5, 2.5), spd(1, 35), acc(-5, 2.5), str(-0.45, 0.45);
    double worst_abs = 0.0, worst_rel = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const VehicleState s{pos(rng), pos(rng), hdg(rng), spd(rng)};
      const ControlInput u{acc(rng), str(rng)};
      const StateJacobians J = linearize(s, u, 0.1, p);
      const FdJac fd = finite_difference(s, u, 0.1, p, 1e-6);
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
          const double e = std::abs(J.A(r, c) - fd.A(r, c));
          worst_abs = std::max(worst_abs, e);
          worst_rel = std::max(worst_rel, e / std::max(1.0, std::abs(fd.A(r, c))));
        }
        for (int c = 0; c < 2; ++c) {
          const double e = std::abs(J.B(r, c) - fd.B(r, c));
          worst_rel = std::max(worst_rel, e / std::max(1.0, std::abs(fd.B(r, c))));
        }
      }
    }
    CHECK(worst_abs < 1e-5);
    CHECK(worst_rel < 1e-4);
  }
}

TEST_CASE("vehicle params validation")
{
  VehicleParams p;
  CHECK_NOTHROW(p.validate());
  p.delta_max = 2.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
