#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsg_acc/scenario.hpp"

namespace tsg_acc {

/// One control step of the closed loop.
struct SimRecord
{
  double t{0};
  VehicleState ego;
  ControlInput input;
  /// arc length and signed lateral offset of the ego on the centerline
  double ego_s{0};
  double lateral{0};
  double ref_speed{0};
  std::optional<LeadState> lead;
  Vector2 lead_position{Vector2::Zero()};
  std::vector<Obstacle> obstacles;
  double t_sh{0};
  bool saturated{false};
  int tsg_checks{0};
  /// NaN without a lead
  double h_acc{0};
  double gap{0};
  std::vector<double> h_obs;
  std::vector<double> clearance;
  /// largest slack over the horizon, per barrier
  double slack_acc{0};
  std::vector<double> slack_obs;
  int qp_iterations{0};
  double solve_time{0};
  bool degraded{false};
};

struct SimLog
{
  std::string name;
  double dt{0};
  bool governor{false};
  bool has_lead{false};
  std::size_t n_obstacles{0};
  std::vector<Vector2> waypoints;
  std::vector<SimRecord> records;
};

/// Summary of a run. Optional fields are absent when the scenario has no lead or no obstacles.
struct Metrics
{
  std::optional<double> min_h_acc;
  std::optional<double> min_gap;
  std::optional<double> min_clearance;
  double max_violation_depth{0};
  double lateral_rms{0};
  double speed_rms{0};
  double max_abs_t_sh{0};
  int steps_shifted{0};
  int saturations{0};
  int degraded_steps{0};
  double max_slack{0};
  double mean_qp_iterations{0};
  double mean_solve_time{0};
  double max_solve_time{0};

  bool operator==(const Metrics&) const = default;
};

struct RunOptions
{
  /// overrides tsg.enabled when set
  std::optional<bool> governor;
  std::optional<std::uint64_t> seed;
};

struct SimResult
{
  SimLog log;
  Metrics metrics;
};

/// Closed-loop simulation. Deterministic given the scenario and seed; never aborts on solver MaxIter.
SimResult run(const Scenario& scenario, const RunOptions& options = {});

Metrics compute_metrics(const SimLog& log);

/// Lead moved along the centerline over `dt` with the schedule's piecewise-constant acceleration.
LeadState advance_lead(const LeadState& lead, const LeadSpec& spec, double t, double dt);

/// Obstacle moved over `dt` with its piecewise-constant velocity schedule.
Obstacle advance_obstacle(const Obstacle& obs, const ObstacleSpec& spec, double t, double dt);

}  // namespace tsg_acc
