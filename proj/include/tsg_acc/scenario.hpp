#pragma once

/**
 * @file
 * @brief Scenario description and its JSON loader.
 *
 * See docs/scenario-format.md for the schema.
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsg_acc/tsg.hpp"

namespace tsg_acc {

class ScenarioInvalid : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

/// Piecewise-constant lead acceleration: `a` applies from `t` until the next entry.
struct LeadPhase
{
  double t{0};
  double a{0};
};

struct LeadSpec
{
  double s0{0};
  double v0{0};
  std::vector<LeadPhase> schedule;

  /// Acceleration commanded at time t.
  double accel_at(double t) const;
};

/// Piecewise-constant obstacle velocity from `t` on.
struct ObstaclePhase
{
  double t{0};
  Vector2 velocity{Vector2::Zero()};
};

struct ObstacleSpec
{
  Vector2 position{Vector2::Zero()};
  Vector2 velocity{Vector2::Zero()};
  double radius{1.0};
  std::vector<ObstaclePhase> schedule;

  Vector2 velocity_at(double t) const;
};

struct Scenario
{
  int schema_version{kSchemaVersion};
  std::string name;
  double dt{0.1};
  double duration{10.0};
  std::uint64_t seed{0};
  /// standard deviation of additive noise on the state seen by the controller (x, y, psi, v)
  Vector4 measurement_noise{Vector4::Zero()};

  std::vector<Vector2> waypoints;
  SpeedProfile speed;
  VehicleState ego;
  /// arc length of the virtual target at t = 0
  double target_s0{0};
  std::optional<LeadSpec> lead;
  std::vector<ObstacleSpec> obstacles;

  ControllerSetup controller;
  TsgSettings tsg;

  /// Number of log records, round(duration / dt) + 1.
  std::size_t record_count() const;
  /// Throws ScenarioInvalid naming the offending field.
  void validate() const;
};

/// Parse a scenario from JSON text. Throws ScenarioInvalid.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

/**
 * @brief Set a numeric field addressed by a dotted path ("acc.time_headway",
 * "obstacles.0.radius") in scenario JSON text and return the new text.
 * Missing object fields are created. Throws ScenarioInvalid when the path
 * runs through a non-container or ends at a non-numeric value.
 */
std::string set_scenario_param(const std::string& text, const std::string& path, double value);

}  // namespace tsg_acc
