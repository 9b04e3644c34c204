#pragma once

#include <stdexcept>
#include <vector>

#include "tsg_acc/dynamics.hpp"

namespace tsg_acc {

class DuplicateWaypoint : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Speed setpoint along the road, piecewise linear in arc length (constant if one knot).
struct SpeedProfile
{
  std::vector<double> s{0.0};
  std::vector<double> v{0.0};

  static SpeedProfile constant(double speed) { return {{0.0}, {speed}}; }
  double at(double arc) const;
  void validate() const;
};

struct ReferencePoint
{
  Vector2 position{Vector2::Zero()};
  double heading{0};
  double curvature{0};
  double speed{0};
};

/// Foot point of a projection onto the centerline.
struct Projection
{
  double s{0};
  /// Signed lateral offset, positive to the left of the direction of travel.
  double lateral{0};
  double heading{0};
  double curvature{0};
};

/**
 * @brief C1 cubic Hermite centerline through the waypoints, chord-length
 * parametrized, with Catmull-Rom-style knot tangents.
 *
 * Interior tangents bisect the adjacent chords and are scaled by the arc/chord
 * ratio of the circle through the knot, which keeps curvature close to the
 * underlying arc on evenly sampled curves. End tangents use the parabolic end
 * condition. Arc length per segment comes from 16-point Gauss-Legendre
 * quadrature on a fixed sub-grid.
 */
class Centerline
{
public:
  explicit Centerline(std::vector<Vector2> waypoints);

  double length() const { return s_table_.back(); }
  const std::vector<Vector2>& waypoints() const { return pts_; }
  /// Cumulative arc length at each waypoint.
  const std::vector<double>& arc_table() const { return s_table_; }

  Vector2 position(double s) const;
  /// Position, unit tangent heading and curvature at arc length s (clamped).
  ReferencePoint sample(double s) const;

  /// Projection with a local Newton search started from `s_hint`.
  Projection project(const Vector2& p, double s_hint) const;
  /// Global projection (coarse scan, then Newton).
  Projection project(const Vector2& p) const;

  /// Segment-local evaluation, for tests and quadrature checks.
  std::size_t segment_count() const { return chord_.size(); }
  double chord(std::size_t seg) const { return chord_[seg]; }
  Vector2 eval(std::size_t seg, double u) const;
  Vector2 eval_d1(std::size_t seg, double u) const;
  Vector2 eval_d2(std::size_t seg, double u) const;

private:
  static constexpr int kSub = 16;

  std::pair<std::size_t, double> locate(double s) const;
  double speed_integral(std::size_t seg, double u0, double u1) const;

  std::vector<Vector2> pts_;
  std::vector<Vector2> tan_;
  std::vector<double> chord_;
  std::vector<double> s_table_;
  // cumulative arc length at kSub+1 equally spaced parameters per segment
  std::vector<std::vector<double>> sub_table_;
};

ReferencePoint sample_reference(const Centerline& line, double s, const SpeedProfile& profile);

/**
 * @brief Uniformly sampled state trajectory of the target.
 *
 * Queries clamp to the sampled support and interpolate linearly, with heading
 * interpolated through the wrapped difference.
 */
class TargetTrajectory
{
public:
  TargetTrajectory(double t0, double dt, std::vector<VehicleState> samples);

  double t0() const { return t0_; }
  double t_end() const { return t0_ + dt_ * static_cast<double>(samples_.size() - 1); }
  double dt() const { return dt_; }
  const std::vector<VehicleState>& samples() const { return samples_; }

  VehicleState at(double t) const;

private:
  double t0_;
  double dt_;
  std::vector<VehicleState> samples_;
};

VehicleState target_state(const TargetTrajectory& traj, double t);
/// target_state(traj, t + t_sh). Shifts must be non-positive.
VehicleState shifted_target(const TargetTrajectory& traj, double t, double t_sh);

/**
 * @brief Virtual target moving along the centerline at the speed profile,
 * starting at arc length s0, sampled on [0, t_end].
 */
TargetTrajectory make_virtual_target(const Centerline& line, const SpeedProfile& profile, double s0, double dt,
                                     double t_end);

}  // namespace tsg_acc
