#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsg_acc/sim.hpp"

namespace tsg_acc {

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form; "nan" for NaN.
std::string format_number(double x);

/// Header of log.csv for a run with `n_obstacles` obstacles.
std::vector<std::string> log_columns(std::size_t n_obstacles);

/**
 * @brief One row per record: t, x, y, psi, v, a, delta, lead_x, lead_y,
 * lead_v, t_sh, h_acc, h_obs_i..., slack_acc, slack_obs_i...
 *
 * Lead columns, h_acc and slack_acc are nan without a lead.
 */
void write_log_csv(std::ostream& out, const SimLog& log);

/// Flat JSON object: run identification followed by the metrics, null for absent values.
std::string metrics_json(const SimLog& log, const Metrics& metrics, std::uint64_t seed);

std::string trajectory_svg(const SimLog& log);
std::string barriers_svg(const SimLog& log);
std::string t_sh_svg(const SimLog& log);
std::string speeds_svg(const SimLog& log);

/**
 * @brief Write log.csv, metrics.json and the four plots into `dir`, creating
 * it if needed. Returns the written paths. Throws IoError.
 */
std::vector<std::filesystem::path> emit_outputs(const SimResult& result, std::uint64_t seed,
                                                const std::filesystem::path& dir);

}  // namespace tsg_acc
