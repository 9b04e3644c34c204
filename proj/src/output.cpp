#include "tsg_acc/output.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace tsg_acc {

namespace {

using Points = std::vector<Vector2>;

struct Series
{
  std::string label;
  std::string color;
  Points points;  // NaN entries break the line
  bool dashed{false};
};

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double x, int precision = 4)
{
  std::ostringstream ss;
  ss.precision(precision);
  ss << x;
  return ss.str();
}

// Round tick step: 1, 2 or 5 times a power of ten.
double tick_step(double span)
{
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

struct Range
{
  double lo{std::numeric_limits<double>::infinity()};
  double hi{-std::numeric_limits<double>::infinity()};

  void add(double v)
  {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish()
  {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-9) {
      const double pad = std::max(1.0, std::abs(lo) * 0.1);
      lo -= pad;
      hi += pad;
    }
  }
};

std::string plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                 const std::vector<Series>& series, bool equal_aspect, std::optional<double> y_cap = std::nullopt)
{
  constexpr double W = 800, H = 500, left = 70, right = 170, top = 40, bottom = 55;
  const double pw = W - left - right, ph = H - top - bottom;

  Range xr, yr;
  for (const Series& s : series)
    for (const Vector2& p : s.points) {
      xr.add(p.x());
      yr.add(y_cap ? std::min(p.y(), *y_cap) : p.y());
    }
  xr.finish();
  yr.finish();
  if (equal_aspect) {
    const double sx = (xr.hi - xr.lo) / pw, sy = (yr.hi - yr.lo) / ph;
    const double s = std::max(sx, sy);
    const double cx = 0.5 * (xr.lo + xr.hi), cy = 0.5 * (yr.lo + yr.hi);
    xr.lo = cx - 0.5 * s * pw;
    xr.hi = cx + 0.5 * s * pw;
    yr.lo = cy - 0.5 * s * ph;
    yr.hi = cy + 0.5 * s * ph;
  } else {
    const double pad = 0.05 * (yr.hi - yr.lo);
    yr.lo -= pad;
    yr.hi += pad;
  }
  auto X = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto Y = [&](double y) { return top + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << W << R"(" height=")" << H << R"(" font-family="sans-serif" font-size="12">)"
    << "\n";
  o << R"(<rect width="100%" height="100%" fill="white"/>)" << "\n";
  o << R"(<text x=")" << W / 2 << R"(" y="22" text-anchor="middle" font-size="15">)" << title << "</text>\n";

  const double xs = tick_step(xr.hi - xr.lo), ys = tick_step(yr.hi - yr.lo);
  for (double v = std::ceil(xr.lo / xs) * xs; v <= xr.hi + 1e-9 * xs; v += xs) {
    o << R"(<line x1=")" << fmt(X(v)) << R"(" y1=")" << top << R"(" x2=")" << fmt(X(v)) << R"(" y2=")" << top + ph
      << R"(" stroke="#e5e5e5"/>)" << "\n";
    o << R"(<text x=")" << fmt(X(v)) << R"(" y=")" << top + ph + 16 << R"(" text-anchor="middle">)" << fmt(std::abs(v) < 1e-12 ? 0.0 : v)
      << "</text>\n";
  }
  for (double v = std::ceil(yr.lo / ys) * ys; v <= yr.hi + 1e-9 * ys; v += ys) {
    o << R"(<line x1=")" << left << R"(" y1=")" << fmt(Y(v)) << R"(" x2=")" << left + pw << R"(" y2=")" << fmt(Y(v))
      << R"(" stroke="#e5e5e5"/>)" << "\n";
    o << R"(<text x=")" << left - 6 << R"(" y=")" << fmt(Y(v) + 4) << R"(" text-anchor="end">)" << fmt(std::abs(v) < 1e-12 ? 0.0 : v)
      << "</text>\n";
  }
  o << R"(<rect x=")" << left << R"(" y=")" << top << R"(" width=")" << pw << R"(" height=")" << ph
    << R"(" fill="none" stroke="black"/>)" << "\n";
  o << R"(<text x=")" << left + pw / 2 << R"(" y=")" << H - 12 << R"(" text-anchor="middle">)" << xlabel << "</text>\n";
  o << R"svg(<text transform="translate(18,)svg" << top + ph / 2 << R"svg() rotate(-90)" text-anchor="middle">)svg" << ylabel
    << "</text>\n";

  o << R"(<clipPath id="plot"><rect x=")" << left << R"(" y=")" << top << R"(" width=")" << pw << R"(" height=")" << ph
    << R"("/></clipPath>)" << "\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    std::string dash = s.dashed ? R"( stroke-dasharray="6,4")" : "";
    std::ostringstream pts;
    auto flush = [&]() {
      const std::string p = pts.str();
      if (!p.empty())
        o << R"svg(<polyline clip-path="url(#plot)" fill="none" stroke=")svg" << s.color << R"(" stroke-width="1.6")" << dash
          << R"( points=")" << p << R"("/>)" << "\n";
      pts.str("");
    };
    for (const Vector2& p : s.points) {
      if (!std::isfinite(p.x()) || !std::isfinite(p.y())) {
        flush();
        continue;
      }
      const double y = y_cap ? std::min(p.y(), *y_cap) : p.y();
      pts << fmt(X(p.x()), 6) << ',' << fmt(Y(y), 6) << ' ';
    }
    flush();
    const double ly = top + 14 + 18 * static_cast<double>(i);
    o << R"(<line x1=")" << left + pw + 12 << R"(" y1=")" << ly - 4 << R"(" x2=")" << left + pw + 36 << R"(" y2=")" << ly - 4
      << R"(" stroke=")" << s.color << R"(" stroke-width="2")" << dash << "/>\n";
    o << R"(<text x=")" << left + pw + 42 << R"(" y=")" << ly << R"(">)" << s.label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_file(const std::filesystem::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string format_number(double x)
{
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

std::vector<std::string> log_columns(std::size_t n_obstacles)
{
  std::vector<std::string> cols{"t", "x", "y", "psi", "v", "a", "delta", "lead_x", "lead_y", "lead_v", "t_sh", "h_acc"};
  for (std::size_t i = 0; i < n_obstacles; ++i) cols.push_back("h_obs_" + std::to_string(i));
  cols.push_back("slack_acc");
  for (std::size_t i = 0; i < n_obstacles; ++i) cols.push_back("slack_obs_" + std::to_string(i));
  return cols;
}

void write_log_csv(std::ostream& out, const SimLog& log)
{
  const auto cols = log_columns(log.n_obstacles);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const SimRecord& r : log.records) {
    std::vector<double> row{r.t, r.ego.x, r.ego.y, r.ego.psi, r.ego.v, r.input.a, r.input.delta};
    if (r.lead) {
      row.insert(row.end(), {r.lead_position.x(), r.lead_position.y(), r.lead->v});
    } else {
      row.insert(row.end(), {nan, nan, nan});
    }
    row.push_back(r.t_sh);
    row.push_back(r.h_acc);
    row.insert(row.end(), r.h_obs.begin(), r.h_obs.end());
    row.push_back(r.lead ? r.slack_acc : nan);
    row.insert(row.end(), r.slack_obs.begin(), r.slack_obs.end());
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

std::string metrics_json(const SimLog& log, const Metrics& m, std::uint64_t seed)
{
  nlohmann::ordered_json j;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  j["scenario"] = log.name;
  j["governor"] = log.governor;
  j["seed"] = seed;
  j["steps"] = log.records.size();
  j["min_h_acc"] = opt(m.min_h_acc);
  j["min_gap"] = opt(m.min_gap);
  j["min_clearance"] = opt(m.min_clearance);
  j["max_violation_depth"] = m.max_violation_depth;
  j["lateral_rms"] = m.lateral_rms;
  j["speed_rms"] = m.speed_rms;
  j["max_abs_t_sh"] = m.max_abs_t_sh;
  j["steps_shifted"] = m.steps_shifted;
  j["saturations"] = m.saturations;
  j["degraded_steps"] = m.degraded_steps;
  j["max_slack"] = m.max_slack;
  j["mean_qp_iterations"] = m.mean_qp_iterations;
  j["mean_solve_time"] = m.mean_solve_time;
  j["max_solve_time"] = m.max_solve_time;
  return j.dump(2) + "\n";
}

std::string trajectory_svg(const SimLog& log)
{
  std::vector<Series> series;
  const Centerline line(log.waypoints);
  Series road{"centerline", "#999999", {}, true};
  const int n = std::max(2, static_cast<int>(line.length() / 1.0));
  for (int i = 0; i <= n; ++i) road.points.push_back(line.position(line.length() * i / n));

  Series ego{"ego", kPalette[0], {}};
  Series lead{"lead", kPalette[1], {}};
  for (const SimRecord& r : log.records) {
    ego.points.push_back(r.ego.position());
    if (r.lead) lead.points.push_back(r.lead_position);
  }
  // clip the road to the neighbourhood of the run
  Range xr, yr;
  for (const auto* s : {&ego, &lead})
    for (const Vector2& p : s->points) xr.add(p.x()), yr.add(p.y());
  for (std::size_t i = 0; i < log.n_obstacles; ++i)
    for (const SimRecord& r : log.records) xr.add(r.obstacles[i].position.x()), yr.add(r.obstacles[i].position.y());
  const double margin = 20.0;
  Points kept;
  for (const Vector2& p : road.points) {
    const bool in = p.x() > xr.lo - margin && p.x() < xr.hi + margin && p.y() > yr.lo - margin && p.y() < yr.hi + margin;
    kept.push_back(in ? p : Vector2(std::numeric_limits<double>::quiet_NaN(), 0.0));
  }
  road.points = std::move(kept);
  series.push_back(std::move(road));
  series.push_back(std::move(ego));
  if (log.has_lead) series.push_back(std::move(lead));
  for (std::size_t i = 0; i < log.n_obstacles; ++i) {
    Series obs{"obstacle " + std::to_string(i), kPalette[(3 + i) % kPalette.size()], {}};
    for (const SimRecord& r : log.records) obs.points.push_back(r.obstacles[i].position);
    series.push_back(std::move(obs));
  }
  return plot(log.name + ": trajectory", "x [m]", "y [m]", series, true);
}

std::string barriers_svg(const SimLog& log)
{
  std::vector<Series> series;
  if (log.has_lead) {
    Series s{"h_acc", kPalette[1], {}};
    for (const SimRecord& r : log.records) s.points.emplace_back(r.t, r.h_acc);
    series.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < log.n_obstacles; ++i) {
    Series s{"h_obs_" + std::to_string(i), kPalette[(3 + i) % kPalette.size()], {}};
    Series c{"clearance_" + std::to_string(i), kPalette[(3 + i) % kPalette.size()], {}, true};
    for (const SimRecord& r : log.records) {
      s.points.emplace_back(r.t, r.h_obs[i]);
      c.points.emplace_back(r.t, r.clearance[i]);
    }
    series.push_back(std::move(s));
    series.push_back(std::move(c));
  }
  Series zero{"zero", "#000000", {}, true};
  if (!log.records.empty()) {
    zero.points.emplace_back(log.records.front().t, 0.0);
    zero.points.emplace_back(log.records.back().t, 0.0);
  }
  series.push_back(std::move(zero));
  return plot(log.name + ": barriers (clipped at 50)", "t [s]", "value", series, false, 50.0);
}

std::string t_sh_svg(const SimLog& log)
{
  Series s{"t_sh", kPalette[0], {}};
  for (const SimRecord& r : log.records) s.points.emplace_back(r.t, r.t_sh);
  return plot(log.name + ": time shift", "t [s]", "t_sh [s]", {s}, false);
}

std::string speeds_svg(const SimLog& log)
{
  std::vector<Series> series;
  Series ego{"ego", kPalette[0], {}};
  Series ref{"reference", "#999999", {}, true};
  Series lead{"lead", kPalette[1], {}};
  for (const SimRecord& r : log.records) {
    ego.points.emplace_back(r.t, r.ego.v);
    ref.points.emplace_back(r.t, r.ref_speed);
    if (r.lead) lead.points.emplace_back(r.t, r.lead->v);
  }
  series.push_back(std::move(ego));
  series.push_back(std::move(ref));
  if (log.has_lead) series.push_back(std::move(lead));
  return plot(log.name + ": speeds", "t [s]", "v [m/s]", series, false);
}

std::vector<std::filesystem::path> emit_outputs(const SimResult& result, std::uint64_t seed,
                                                const std::filesystem::path& dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  std::ostringstream csv;
  write_log_csv(csv, result.log);
  const std::pair<const char*, std::string> files[] = {
      {"log.csv", csv.str()},
      {"metrics.json", metrics_json(result.log, result.metrics, seed)},
      {"trajectory.svg", trajectory_svg(result.log)},
      {"barriers.svg", barriers_svg(result.log)},
      {"t_sh.svg", t_sh_svg(result.log)},
      {"speeds.svg", speeds_svg(result.log)},
  };
  for (const auto& [name, text] : files) {
    write_file(dir / name, text);
    written.push_back(dir / name);
  }
  return written;
}

}  // namespace tsg_acc
