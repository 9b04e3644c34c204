#include "tsg_acc/road.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace tsg_acc {

namespace {

// Positive half of the 16-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 8> kGlNodes{0.09501250983763745, 0.2816035507792589, 0.45801677765722737,
                                         0.6178762444026438,  0.755404408355003,  0.8656312023878318,
                                         0.9445750230732326,  0.9894009349916499};
constexpr std::array<double, 8> kGlWeights{0.18945061045506859, 0.1826034150449236,  0.16915651939500262,
                                           0.14959598881657676, 0.12462897125553403, 0.09515851168249259,
                                           0.062253523938647706, 0.027152459411754037};

Vector2 left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

}  // namespace

double SpeedProfile::at(double arc) const
{
  if (s.size() == 1 || arc <= s.front()) return v.front();
  if (arc >= s.back()) return v.back();
  const auto it = std::upper_bound(s.begin(), s.end(), arc);
  const auto i = static_cast<std::size_t>(it - s.begin()) - 1;
  const double w = (arc - s[i]) / (s[i + 1] - s[i]);
  return v[i] + w * (v[i + 1] - v[i]);
}

void SpeedProfile::validate() const
{
  if (s.empty() || s.size() != v.size()) throw std::invalid_argument("speed_profile: s and v must be non-empty and equal length");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i]) || !std::isfinite(v[i]) || v[i] < 0)
      throw std::invalid_argument("speed_profile: speeds must be finite and >= 0");
    if (i > 0 && !(s[i] > s[i - 1])) throw std::invalid_argument("speed_profile: s must be strictly increasing");
  }
}

Centerline::Centerline(std::vector<Vector2> waypoints) : pts_(std::move(waypoints))
{
  if (pts_.size() < 2) throw std::invalid_argument("centerline needs at least 2 waypoints");
  const std::size_t n = pts_.size();
  std::vector<Vector2> dir(n - 1);
  chord_.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vector2 d = pts_[i + 1] - pts_[i];
    chord_[i] = d.norm();
    if (!(chord_[i] > 1e-9))
      throw DuplicateWaypoint("waypoints " + std::to_string(i) + " and " + std::to_string(i + 1) + " coincide");
    dir[i] = d / chord_[i];
  }

  tan_.assign(n, Vector2::Zero());
  if (n == 2) {
    tan_[0] = tan_[1] = dir[0];
  } else {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      Vector2 w = chord_[i] * dir[i - 1] + chord_[i - 1] * dir[i];
      if (w.norm() < 1e-12) w = dir[i];  // hairpin
      w.normalize();
      const double phi = std::acos(std::clamp(dir[i - 1].dot(dir[i]), -1.0, 1.0));
      const double ratio = phi < 1e-9 ? 1.0 : (0.5 * phi) / std::sin(0.5 * phi);
      tan_[i] = ratio * w;
    }
    tan_[0] = 2.0 * dir[0] - tan_[1];
    tan_[n - 1] = 2.0 * dir[n - 2] - tan_[n - 2];
  }

  s_table_.assign(n, 0.0);
  sub_table_.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    auto& tab = sub_table_[i];
    tab.assign(kSub + 1, 0.0);
    const double du = chord_[i] / kSub;
    for (int j = 0; j < kSub; ++j) tab[j + 1] = tab[j] + speed_integral(i, j * du, (j + 1) * du);
    s_table_[i + 1] = s_table_[i] + tab.back();
  }
}

Vector2 Centerline::eval(std::size_t seg, double u) const
{
  const double h = chord_[seg];
  const double t = u / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * pts_[seg] + (t3 - 2 * t2 + t) * h * tan_[seg] + (-2 * t3 + 3 * t2) * pts_[seg + 1] +
         (t3 - t2) * h * tan_[seg + 1];
}

Vector2 Centerline::eval_d1(std::size_t seg, double u) const
{
  const double h = chord_[seg];
  const double t = u / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * pts_[seg] + (3 * t2 - 4 * t + 1) * h * tan_[seg] + (-6 * t2 + 6 * t) * pts_[seg + 1] +
          (3 * t2 - 2 * t) * h * tan_[seg + 1]) /
         h;
}

Vector2 Centerline::eval_d2(std::size_t seg, double u) const
{
  const double h = chord_[seg];
  const double t = u / h;
  return ((12 * t - 6) * pts_[seg] + (6 * t - 4) * h * tan_[seg] + (-12 * t + 6) * pts_[seg + 1] +
          (6 * t - 2) * h * tan_[seg + 1]) /
         (h * h);
}

double Centerline::speed_integral(std::size_t seg, double u0, double u1) const
{
  const double mid = 0.5 * (u0 + u1);
  const double half = 0.5 * (u1 - u0);
  double acc = 0.0;
  for (std::size_t k = 0; k < kGlNodes.size(); ++k) {
    acc += kGlWeights[k] * (eval_d1(seg, mid + half * kGlNodes[k]).norm() + eval_d1(seg, mid - half * kGlNodes[k]).norm());
  }
  return half * acc;
}

std::pair<std::size_t, double> Centerline::locate(double s) const
{
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(s_table_.begin(), s_table_.end(), s);
  std::size_t seg = it == s_table_.begin() ? 0 : static_cast<std::size_t>(it - s_table_.begin()) - 1;
  seg = std::min(seg, chord_.size() - 1);
  const double local = s - s_table_[seg];
  const auto& tab = sub_table_[seg];
  if (local <= 0.0) return {seg, 0.0};
  if (local >= tab.back()) return {seg, chord_[seg]};

  auto jt = std::upper_bound(tab.begin(), tab.end(), local);
  const auto j = static_cast<std::size_t>(jt - tab.begin()) - 1;
  const double du = chord_[seg] / kSub;
  const double ua = static_cast<double>(j) * du;
  const double ub = ua + du;
  double u = ua + du * (local - tab[j]) / (tab[j + 1] - tab[j]);
  for (int iter = 0; iter < 8; ++iter) {
    const double F = tab[j] + speed_integral(seg, ua, u) - local;
    const double step = F / eval_d1(seg, u).norm();
    u = std::clamp(u - step, ua, ub);
    if (std::abs(step) < 1e-13 * (1.0 + chord_[seg])) break;
  }
  return {seg, u};
}

Vector2 Centerline::position(double s) const
{
  const auto [seg, u] = locate(s);
  return eval(seg, u);
}

ReferencePoint Centerline::sample(double s) const
{
  const auto [seg, u] = locate(s);
  const Vector2 d1 = eval_d1(seg, u);
  const Vector2 d2 = eval_d2(seg, u);
  ReferencePoint out;
  out.position = eval(seg, u);
  out.heading = std::atan2(d1.y(), d1.x());
  out.curvature = (d1.x() * d2.y() - d1.y() * d2.x()) / std::pow(d1.norm(), 3);
  return out;
}

Projection Centerline::project(const Vector2& p, double s_hint) const
{
  double s = std::clamp(s_hint, 0.0, length());
  ReferencePoint ref = sample(s);
  for (int iter = 0; iter < 30; ++iter) {
    const Vector2 diff = p - ref.position;
    const Vector2 t{std::cos(ref.heading), std::sin(ref.heading)};
    const double g = diff.dot(t);
    double dg = 1.0 - ref.curvature * diff.dot(left_normal(ref.heading));
    if (dg < 0.2) dg = 0.2;  // near the center of curvature, damp the step
    const double next = std::clamp(s + g / dg, 0.0, length());
    const double moved = next - s;
    s = next;
    ref = sample(s);
    if (std::abs(moved) < 1e-11) break;
  }
  Projection out;
  out.s = s;
  out.heading = ref.heading;
  out.curvature = ref.curvature;
  out.lateral = (p - ref.position).dot(left_normal(ref.heading));
  return out;
}

Projection Centerline::project(const Vector2& p) const
{
  // scan in parameter space; arc length from the sub-grid table is close enough for a hint
  constexpr int kScan = 4;
  double best_s = 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t seg = 0; seg < chord_.size(); ++seg) {
    const auto& tab = sub_table_[seg];
    const double du = chord_[seg] / (kSub * kScan);
    for (int j = 0; j <= kSub * kScan; ++j) {
      const double d = (eval(seg, j * du) - p).squaredNorm();
      if (d < best_d) {
        best_d = d;
        const int cell = std::min(j / kScan, kSub - 1);
        const double w = static_cast<double>(j - cell * kScan) / kScan;
        best_s = s_table_[seg] + tab[cell] + w * (tab[cell + 1] - tab[cell]);
      }
    }
  }
  return project(p, best_s);
}

ReferencePoint sample_reference(const Centerline& line, double s, const SpeedProfile& profile)
{
  ReferencePoint ref = line.sample(s);
  ref.speed = profile.at(std::clamp(s, 0.0, line.length()));
  return ref;
}

TargetTrajectory::TargetTrajectory(double t0, double dt, std::vector<VehicleState> samples)
    : t0_(t0), dt_(dt), samples_(std::move(samples))
{
  if (samples_.empty()) throw std::invalid_argument("target trajectory needs at least one sample");
  if (!(dt_ > 0)) throw std::invalid_argument("target trajectory dt must be > 0");
  for (const auto& s : samples_)
    if (s.v < 0) throw std::invalid_argument("target speed must be >= 0");
}

VehicleState TargetTrajectory::at(double t) const
{
  if (samples_.size() == 1 || t <= t0_) return samples_.front();
  if (t >= t_end()) return samples_.back();
  const double pos = (t - t0_) / dt_;
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-9) return samples_[static_cast<std::size_t>(nearest)];
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - static_cast<double>(i);
  const VehicleState& a = samples_[i];
  const VehicleState& b = samples_[i + 1];
  return {a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), wrap_angle(a.psi + w * angle_diff(b.psi, a.psi)),
          a.v + w * (b.v - a.v)};
}

VehicleState target_state(const TargetTrajectory& traj, double t) { return traj.at(t); }

VehicleState shifted_target(const TargetTrajectory& traj, double t, double t_sh) { return traj.at(t + t_sh); }

TargetTrajectory make_virtual_target(const Centerline& line, const SpeedProfile& profile, double s0, double dt,
                                     double t_end)
{
  const auto count = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9)) + 1;
  std::vector<VehicleState> samples;
  samples.reserve(count);
  constexpr int kSubsteps = 10;
  const double h = dt / kSubsteps;
  double s = s0;
  for (std::size_t k = 0; k < count; ++k) {
    const ReferencePoint ref = sample_reference(line, s, profile);
    samples.push_back({ref.position.x(), ref.position.y(), ref.heading, ref.speed});
    for (int j = 0; j < kSubsteps; ++j) {
      // RK4 on ds/dt = v(s)
      const double k1 = profile.at(s);
      const double k2 = profile.at(s + 0.5 * h * k1);
      const double k3 = profile.at(s + 0.5 * h * k2);
      const double k4 = profile.at(s + h * k3);
      s += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
  }
  return TargetTrajectory(0.0, dt, std::move(samples));
}

}  // namespace tsg_acc
