#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "tsg_acc/road.hpp"

using namespace tsg_acc;

namespace {

std::vector<Vector2> quarter_circle(double radius, int points)
{
  std::vector<Vector2> pts;
  for (int i = 0; i < points; ++i) {
    const double th = 0.5 * std::numbers::pi * i / (points - 1);
    pts.emplace_back(radius * std::sin(th), radius - radius * std::cos(th));
  }
  return pts;
}

// Adaptive Simpson, independent of the Gauss-Legendre path in Centerline.
double simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 0)
{
  const double c = 0.5 * (a + b);
  const double whole = (b - a) / 6 * (f(a) + 4 * f(c) + f(b));
  const double left = (c - a) / 6 * (f(a) + 4 * f(0.5 * (a + c)) + f(c));
  const double right = (b - c) / 6 * (f(c) + 4 * f(0.5 * (c + b)) + f(b));
  if (depth > 40 || std::abs(left + right - whole) < 15 * tol) return left + right + (left + right - whole) / 15;
  return simpson(f, a, c, tol / 2, depth + 1) + simpson(f, c, b, tol / 2, depth + 1);
}

TargetTrajectory straight_target(double speed, double t_end)
{
  const Centerline line({{0, 0}, {1000, 0}});
  return make_virtual_target(line, SpeedProfile::constant(speed), 0.0, 0.1, t_end);
}

}  // namespace

TEST_CASE("straight centerline")
{
  const Centerline line({{0, 0}, {100, 0}});
  CHECK(line.length() == doctest::Approx(100.0).epsilon(1e-12));
  for (double s : {0.0, 13.0, 50.0, 99.0}) CHECK(line.sample(s).heading == doctest::Approx(0.0));
  const ReferencePoint mid = line.sample(50.0);
  CHECK(mid.position.x() == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(mid.position.y() == doctest::Approx(0.0));
  CHECK(mid.curvature == doctest::Approx(0.0));
}

TEST_CASE("quarter circle centerline")
{
  const auto pts = quarter_circle(50.0, 9);
  const Centerline line(pts);
  CHECK(std::abs(line.length() - 25 * std::numbers::pi) / (25 * std::numbers::pi) < 5e-3);
  CHECK(line.length() >= (pts.back() - pts.front()).norm());
  CHECK((line.position(0.0) - pts.front()).norm() < 1e-12);
  CHECK((line.position(line.length()) - pts.back()).norm() < 1e-9);
  CHECK((line.position(line.length() + 5.0) - pts.back()).norm() < 1e-9);

  SUBCASE("curvature away from the ends")
  {
    for (double s = 0.15 * line.length(); s <= 0.85 * line.length(); s += 0.25)
      CHECK(std::abs(line.sample(s).curvature - 0.02) < 5e-4);
  }
  SUBCASE("arc length table against adaptive Simpson")
  {
    double total = 0.0;
    for (std::size_t seg = 0; seg < line.segment_count(); ++seg) {
      total += simpson([&](double u) { return line.eval_d1(seg, u).norm(); }, 0.0, line.chord(seg), 1e-12);
      CHECK(std::abs(total - line.arc_table()[seg + 1]) / total < 1e-6);
    }
  }
  SUBCASE("injective sampling")
  {
    for (double s = 0.0; s + 0.5 < line.length(); s += 0.5)
      CHECK((line.position(s + 0.5) - line.position(s)).norm() > 0.4);
  }
  SUBCASE("arc length parametrization")
  {
    const double h = 1e-4;
    for (double s = 1.0; s < line.length() - 1.0; s += 3.7)
      CHECK((line.position(s + h) - line.position(s - h)).norm() / (2 * h) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("projection")
  {
    const Vector2 center{0, 50};
    for (double th : {0.3, 0.7, 1.1}) {
      const Vector2 dir{std::sin(th), -std::cos(th)};
      const Vector2 p = center + 48.0 * dir;  // 2 m inside the turn
      const Projection pr = line.project(p);
      CHECK(pr.lateral == doctest::Approx(2.0).epsilon(2e-3));
      CHECK(pr.s == doctest::Approx(50.0 * th).epsilon(2e-3));
      const Projection local = line.project(p, pr.s + 3.0);
      CHECK(local.s == doctest::Approx(pr.s).epsilon(1e-9));
    }
  }
}

TEST_CASE("centerline errors")
{
  CHECK_THROWS_AS(Centerline({{0, 0}, {0, 0}, {1, 0}}), DuplicateWaypoint);
  CHECK_THROWS_AS(Centerline({{0, 0}}), std::invalid_argument);
}

TEST_CASE("speed profile")
{
  const SpeedProfile prof{{0, 100, 200}, {10, 20, 5}};
  CHECK(prof.at(-5) == 10);
  CHECK(prof.at(50) == doctest::Approx(15));
  CHECK(prof.at(150) == doctest::Approx(12.5));
  CHECK(prof.at(1e6) == 5);
  const ReferencePoint ref = sample_reference(Centerline({{0, 0}, {300, 0}}), 50, prof);
  CHECK(ref.speed == doctest::Approx(15));
  CHECK_THROWS(SpeedProfile{{0, 0}, {1, 1}}.validate());
}

TEST_CASE("target trajectory queries")
{
  const TargetTrajectory traj = straight_target(10.0, 20.0);
  SUBCASE("grid times are exact")
  {
    for (std::size_t k = 0; k < traj.samples().size(); k += 7) {
      const VehicleState s = target_state(traj, 0.1 * static_cast<double>(k));
      CHECK(s.vec() == traj.samples()[k].vec());
    }
  }
  SUBCASE("linear motion")
  {
    CHECK(target_state(traj, 3.7).x == doctest::Approx(37.0).epsilon(1e-9));
    CHECK(target_state(traj, 3.75).x == doctest::Approx(37.5).epsilon(1e-9));
  }
  SUBCASE("clamping")
  {
    CHECK(target_state(traj, 25.0).vec() == traj.samples().back().vec());
    CHECK(shifted_target(traj, 0.5, -1.0).vec() == traj.samples().front().vec());
  }
  SUBCASE("shift")
  {
    CHECK(shifted_target(traj, 7.3, 0.0).vec() == target_state(traj, 7.3).vec());
    CHECK(target_state(traj, 7.3).x - shifted_target(traj, 7.3, -1.0).x == doctest::Approx(10.0).epsilon(1e-9));
  }
  SUBCASE("zero shift is the identity on random queries")
  {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> t(-2.0, 22.0), sh(-5.0, 0.0);
    for (int i = 0; i < 1000; ++i) {
      const double q = t(rng);
      CHECK(shifted_target(traj, q, 0.0).vec() == target_state(traj, q).vec());
      const double s1 = sh(rng);
      CHECK(shifted_target(traj, q, s1).vec() == target_state(traj, q + s1).vec());
    }
  }
  SUBCASE("heading interpolates through the wrap")
  {
    const TargetTrajectory wrap(0.0, 1.0, {{0, 0, 3.1, 1}, {1, 0, -3.1, 1}});
    const double psi = wrap.at(0.5).psi;
    CHECK(std::abs(std::abs(psi) - std::numbers::pi) < 1e-9);
  }
}

TEST_CASE("virtual target on a curve follows the speed profile")
{
  const Centerline line(quarter_circle(50.0, 9));
  const TargetTrajectory traj = make_virtual_target(line, SpeedProfile::constant(5.0), 0.0, 0.1, 10.0);
  const Projection pr = line.project(target_state(traj, 10.0).position());
  CHECK(pr.s == doctest::Approx(50.0).epsilon(1e-6));
  CHECK(std::abs(pr.lateral) < 1e-6);
}
