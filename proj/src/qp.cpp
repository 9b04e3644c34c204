#include "tsg_acc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace tsg_acc {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr int kScalingIters = 10;
constexpr int kAdaptEvery = 25;
constexpr int kPolishPasses = 8;
constexpr int kPolishEvery = 200;

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

double clamp_scale(double v) { return v < 1e-4 ? 1.0 : std::clamp(v, 1e-4, 1e4); }

/// Equilibrated problem in the form l <= C x <= u.
struct Scaled
{
  MatrixXd H;
  VectorXd g;
  MatrixXd C;
  VectorXd l;
  VectorXd u;
  VectorXd D;  // x = D xs
  VectorXd E;  // rows scaled by E
  double c{1};
};

// Farkas certificate from the change of the dual iterate: C' dy ~ 0 with
// u' max(dy, 0) + l' min(dy, 0) < 0.
bool primal_infeasible(const DenseQp& qp, const VectorXd& dy, double eps)
{
  const Index m = qp.m(), n = qp.n();
  const double norm = dy.lpNorm<Eigen::Infinity>();
  if (!(norm > 1e-12)) return false;
  const VectorXd cty = qp.A.transpose() * dy.head(m) + dy.tail(n);
  if (cty.lpNorm<Eigen::Infinity>() > eps * norm) return false;
  double support = 0;
  for (Index i = 0; i < m + n; ++i) {
    const double d = dy(i);
    const double hi = i < m ? qp.b(i) : qp.ub(i - m);
    const double lo = i < m ? -kInf : qp.lb(i - m);
    if (d > eps * norm) {
      if (!std::isfinite(hi)) return false;
      support += hi * d;
    } else if (d < -eps * norm) {
      if (!std::isfinite(lo)) return false;
      support += lo * d;
    }
  }
  return support < -eps * norm;
}

Scaled equilibrate(const DenseQp& qp)
{
  const Index n = qp.n();
  const Index m = qp.m();
  Scaled s;
  s.H = qp.H;
  s.g = qp.g;
  s.C.resize(m + n, n);
  s.C.topRows(m) = qp.A;
  s.C.bottomRows(n).setIdentity();
  s.D = VectorXd::Ones(n);
  s.E = VectorXd::Ones(m + n);

  for (int it = 0; it < kScalingIters; ++it) {
    VectorXd dt(n), et(m + n);
    for (Index j = 0; j < n; ++j) {
      const double colmax = std::max(s.H.col(j).cwiseAbs().maxCoeff(), s.C.col(j).cwiseAbs().maxCoeff());
      dt(j) = 1.0 / std::sqrt(clamp_scale(colmax));
    }
    for (Index i = 0; i < m + n; ++i) {
      const double rowmax = n ? s.C.row(i).cwiseAbs().maxCoeff() : 0.0;
      et(i) = 1.0 / std::sqrt(clamp_scale(rowmax));
    }
    s.H = dt.asDiagonal() * s.H * dt.asDiagonal();
    s.C = et.asDiagonal() * s.C * dt.asDiagonal();
    s.g = dt.cwiseProduct(s.g);
    s.D = s.D.cwiseProduct(dt);
    s.E = s.E.cwiseProduct(et);
  }

  double hmean = 0.0;
  for (Index j = 0; j < n; ++j) hmean += s.H.col(j).cwiseAbs().maxCoeff();
  hmean = n ? hmean / static_cast<double>(n) : 1.0;
  s.c = 1.0 / clamp_scale(std::max(hmean, inf_norm(s.g)));
  s.H *= s.c;
  s.g *= s.c;

  s.l.resize(m + n);
  s.u.resize(m + n);
  for (Index i = 0; i < m; ++i) {
    s.l(i) = -kInf;
    s.u(i) = qp.b(i) * s.E(i);
  }
  for (Index j = 0; j < n; ++j) {
    s.l(m + j) = std::isfinite(qp.lb(j)) ? qp.lb(j) * s.E(m + j) : -kInf;
    s.u(m + j) = std::isfinite(qp.ub(j)) ? qp.ub(j) * s.E(m + j) : kInf;
  }
  return s;
}

double data_scale(const DenseQp& qp, const VectorXd& z)
{
  double scale = inf_norm(qp.g);
  scale = std::max(scale, inf_norm(qp.H * z));
  for (Index i = 0; i < qp.b.size(); ++i)
    if (std::isfinite(qp.b(i))) scale = std::max(scale, std::abs(qp.b(i)));
  return 1.0 + scale;
}

struct Candidate
{
  VectorXd z, lam, mu;
  double kkt{kInf};
  std::vector<Index> active;
};

/// Solve the equality-constrained KKT system on the active set guessed from (z, y).
std::optional<Candidate> polish(const DenseQp& qp, const VectorXd& zrow, const VectorXd& y)
{
  const Index n = qp.n();
  const Index m = qp.m();
  std::vector<Index> rows;
  std::vector<double> target;
  for (Index i = 0; i < m + n; ++i) {
    const double lo = i < m ? -kInf : qp.lb(i - m);
    const double hi = i < m ? qp.b(i) : qp.ub(i - m);
    if (std::isfinite(hi) && hi - zrow(i) < y(i)) {
      rows.push_back(i);
      target.push_back(hi);
    } else if (std::isfinite(lo) && zrow(i) - lo < -y(i)) {
      rows.push_back(i);
      target.push_back(lo);
    }
  }
  const auto k = static_cast<Index>(rows.size());
  MatrixXd K = MatrixXd::Zero(n + k, n + k);
  VectorXd rhs(n + k);
  K.topLeftCorner(n, n) = qp.H;
  rhs.head(n) = -qp.g;
  for (Index r = 0; r < k; ++r) {
    const Index i = rows[static_cast<std::size_t>(r)];
    if (i < m) {
      K.block(n + r, 0, 1, n) = qp.A.row(i);
      K.block(0, n + r, n, 1) = qp.A.row(i).transpose();
    } else {
      K(n + r, i - m) = 1.0;
      K(i - m, n + r) = 1.0;
    }
    rhs(n + r) = target[static_cast<std::size_t>(r)];
  }
  constexpr double delta = 1e-9;
  MatrixXd Kreg = K;
  Kreg.topLeftCorner(n, n).diagonal().array() += delta;
  Kreg.bottomRightCorner(k, k).diagonal().array() -= delta;
  const Eigen::PartialPivLU<MatrixXd> lu(Kreg);
  VectorXd sol = lu.solve(rhs);
  for (int it = 0; it < 4; ++it) sol += lu.solve(rhs - K * sol);
  if (!sol.allFinite()) return std::nullopt;

  Candidate c;
  c.z = sol.head(n);
  c.lam = VectorXd::Zero(m);
  c.mu = VectorXd::Zero(n);
  for (Index r = 0; r < k; ++r) {
    const Index i = rows[static_cast<std::size_t>(r)];
    if (i < m) c.lam(i) = sol(n + r);
    else c.mu(i - m) = sol(n + r);
  }
  c.kkt = kkt_residual(qp, c.z, c.lam, c.mu);
  c.active = std::move(rows);
  return c;
}

}  // namespace

DenseQp DenseQp::unconstrained(const MatrixXd& H, const VectorXd& g)
{
  const Index n = H.rows();
  return {H, g, MatrixXd(0, n), VectorXd(0), VectorXd::Constant(n, -kInf), VectorXd::Constant(n, kInf)};
}

void DenseQp::validate() const
{
  const Index nn = H.rows();
  if (H.cols() != nn) throw std::invalid_argument("qp: H must be square");
  if (g.size() != nn || lb.size() != nn || ub.size() != nn) throw std::invalid_argument("qp: g, lb, ub must have size n");
  if (A.cols() != nn || A.rows() != b.size()) throw std::invalid_argument("qp: A must be m x n with b of size m");
  if (nn && (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw std::invalid_argument("qp: H must be symmetric");
  for (Index i = 0; i < nn; ++i)
    if (!(lb(i) <= ub(i))) throw std::invalid_argument("qp: lb must not exceed ub");
  if (!H.allFinite() || !g.allFinite() || !A.allFinite()) throw std::invalid_argument("qp: non-finite data");
}

std::string_view to_string(QpStatus s)
{
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIter: return "max_iter";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

double kkt_residual(const DenseQp& qp, const VectorXd& z, const VectorXd& lam, const VectorXd& mu)
{
  const VectorXd stat = qp.H * z + qp.g + qp.A.transpose() * lam + mu;
  double res = inf_norm(stat);
  const VectorXd Az = qp.A * z;
  for (Index i = 0; i < qp.m(); ++i) {
    const double slack = qp.b(i) - Az(i);
    res = std::max(res, std::max(-slack, 0.0));
    res = std::max(res, std::max(-lam(i), 0.0));
    res = std::max(res, std::abs(lam(i) * slack));
  }
  for (Index j = 0; j < qp.n(); ++j) {
    res = std::max(res, std::max(qp.lb(j) - z(j), 0.0));
    res = std::max(res, std::max(z(j) - qp.ub(j), 0.0));
    if (mu(j) > 0) res = std::max(res, std::isfinite(qp.ub(j)) ? std::abs(mu(j) * (qp.ub(j) - z(j))) : kInf);
    if (mu(j) < 0) res = std::max(res, std::isfinite(qp.lb(j)) ? std::abs(mu(j) * (z(j) - qp.lb(j))) : kInf);
  }
  return res;
}

double kkt_residual(const DenseQp& qp, const VectorXd& z, const VectorXd& lam)
{
  const VectorXd r0 = qp.H * z + qp.g + qp.A.transpose() * lam;
  VectorXd mu = VectorXd::Zero(qp.n());
  for (Index j = 0; j < qp.n(); ++j) {
    const double want = -r0(j);
    const double bound = want > 0 ? qp.ub(j) : qp.lb(j);
    if (!std::isfinite(bound)) continue;
    // the multiplier trades stationarity |r0| against complementarity |r0| * dist
    if (std::abs(z(j) - bound) < 1.0) mu(j) = want;
  }
  return kkt_residual(qp, z, lam, mu);
}

double dual_objective(const DenseQp& qp, const VectorXd& z, const VectorXd& lam, const VectorXd& mu)
{
  double d = -0.5 * z.dot(qp.H * z) - qp.b.dot(lam);
  for (Index j = 0; j < qp.n(); ++j) {
    if (mu(j) > 0) d -= mu(j) * qp.ub(j);
    if (mu(j) < 0) d -= mu(j) * qp.lb(j);
  }
  return d;
}

QpSolution QpSolver::solve(const DenseQp& qp, const QpSolution* warm)
{
  qp.validate();
  const Index n = qp.n();
  const Index m = qp.m();
  const Index p = m + n;
  const QpSettings& cfg = settings_;
  const Scaled s = equilibrate(qp);

  const double sigma = std::max(cfg.regularization, 1e-12);
  double rho = cfg.rho;
  VectorXd rho_vec(p);
  auto set_rho = [&](double r) {
    for (Index i = 0; i < p; ++i) {
      if (!std::isfinite(s.l(i)) && !std::isfinite(s.u(i))) rho_vec(i) = kRhoMin;
      else if (s.u(i) - s.l(i) < 1e-9) rho_vec(i) = 1e3 * r;
      else rho_vec(i) = r;
    }
  };
  set_rho(rho);

  const MatrixXd Hsig = s.H + sigma * MatrixXd::Identity(n, n);
  Eigen::LLT<MatrixXd> llt;
  auto factor = [&] { llt.compute(Hsig + s.C.transpose() * rho_vec.asDiagonal() * s.C); };
  factor();

  VectorXd xs = VectorXd::Zero(n);
  VectorXd zs = VectorXd::Zero(p);
  VectorXd ys = VectorXd::Zero(p);
  if (warm && warm->z.size() == n && warm->lam.size() == m && warm->mu.size() == n) {
    xs = warm->z.cwiseQuotient(s.D);
    zs = (s.C * xs).cwiseMax(s.l).cwiseMin(s.u);
    VectorXd y(p);
    y << warm->lam, warm->mu;
    ys = s.c * y.cwiseQuotient(s.E);
  }

  QpSolution out;
  out.status = QpStatus::MaxIter;
  VectorXd ys_prev = ys;

  auto unscale = [&](VectorXd& x, VectorXd& zrow, VectorXd& y) {
    x = s.D.cwiseProduct(xs);
    zrow = zs.cwiseQuotient(s.E);
    y = s.E.cwiseProduct(ys) / s.c;
  };

  auto finish = [&](const VectorXd& x, const VectorXd& y, int iters, QpStatus status) {
    out.z = x;
    out.lam = y.head(m);
    out.mu = y.tail(n);
    out.iterations = iters;
    out.status = status;
    out.kkt_residual = kkt_residual(qp, out.z, out.lam, out.mu);
    return out;
  };

  auto try_polish = [&](const VectorXd& zrow, const VectorXd& y, int iters) -> bool {
    if (!cfg.polish) return false;
    // active-set refinement: re-guess the set from the last candidate until it repeats
    auto cand = polish(qp, zrow, y);
    for (int pass = 1; cand && pass < kPolishPasses && !(cand->kkt <= cfg.tol * data_scale(qp, cand->z)); ++pass) {
      VectorXd zr(p), yr(p);
      zr << qp.A * cand->z, cand->z;
      yr << cand->lam, cand->mu;
      auto next = polish(qp, zr, yr);
      if (!next || next->active == cand->active) break;
      cand = std::move(next);
    }
    if (!cand || !(cand->kkt <= cfg.tol * data_scale(qp, cand->z))) return false;
    out.z = cand->z;
    out.lam = cand->lam;
    out.mu = cand->mu;
    out.kkt_residual = cand->kkt;
    out.iterations = iters;
    out.status = QpStatus::Optimal;
    out.polished = true;
    return true;
  };

  VectorXd x, zrow, y;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    const VectorXd rhs = sigma * xs - s.g + s.C.transpose() * (rho_vec.cwiseProduct(zs) - ys);
    const VectorXd xt = llt.solve(rhs);
    const VectorXd zt = s.C * xt;
    xs = cfg.alpha * xt + (1.0 - cfg.alpha) * xs;
    const VectorXd zr = cfg.alpha * zt + (1.0 - cfg.alpha) * zs;
    const VectorXd znew = (zr + ys.cwiseQuotient(rho_vec)).cwiseMax(s.l).cwiseMin(s.u);
    ys_prev = ys;
    ys += rho_vec.cwiseProduct(zr - znew);
    zs = znew;

    const bool check = k == 1 || k % cfg.check_every == 0 || k == cfg.max_iter;
    if (!check) continue;

    unscale(x, zrow, y);
    const VectorXd Cx = s.C * xs;
    const VectorXd Cx_u = Cx.cwiseQuotient(s.E);
    const double prim = inf_norm(Cx_u - zrow);
    const VectorXd Hx = qp.H * x;
    VectorXd Cty = qp.A.transpose() * y.head(m) + y.tail(n);
    const double dual = inf_norm(Hx + qp.g + Cty);
    const double eps_p = cfg.tol + cfg.tol * std::max(inf_norm(Cx_u), inf_norm(zrow));
    const double eps_d = cfg.tol + cfg.tol * std::max({inf_norm(Hx), inf_norm(Cty), inf_norm(qp.g)});

    const bool converged = prim <= eps_p && dual <= eps_d;
    if (converged || (k % kAdaptEvery == 0 && prim <= 1e3 * eps_p && dual <= 1e3 * eps_d) || k % kPolishEvery == 0) {
      if (try_polish(zrow, y, k)) return out;
    }
    if (converged) {
      const double kkt = kkt_residual(qp, x, y.head(m), y.tail(n));
      if (kkt <= cfg.tol * data_scale(qp, x) || !cfg.polish) return finish(x, y, k, QpStatus::Optimal);
    }

    if (prim > eps_p && primal_infeasible(qp, s.E.cwiseProduct(ys - ys_prev) / s.c, cfg.infeasibility_tol))
      return finish(x, y, k, QpStatus::Infeasible);

    if (k % kAdaptEvery == 0) {
      // balance scaled residuals
      const double prim_s = inf_norm(Cx - zs) / std::max({inf_norm(Cx), inf_norm(zs), 1e-12});
      const VectorXd Hxs = s.H * xs;
      const VectorXd Ctys = s.C.transpose() * ys;
      const double dual_s = inf_norm(Hxs + s.g + Ctys) / std::max({inf_norm(Hxs), inf_norm(Ctys), inf_norm(s.g), 1e-12});
      const double ratio = std::sqrt(prim_s / std::max(dual_s, 1e-12));
      const double next = std::clamp(rho * ratio, kRhoMin, kRhoMax);
      if (next > 5.0 * rho || next < 0.2 * rho) {
        rho = next;
        set_rho(rho);
        factor();
      }
    }
  }
  unscale(x, zrow, y);
  if (try_polish(zrow, y, cfg.max_iter)) return out;
  return finish(x, y, cfg.max_iter, QpStatus::MaxIter);
}

QpSolution solve(const DenseQp& qp, const QpSettings& settings)
{
  QpSolver solver(settings);
  return solver.solve(qp);
}

}  // namespace tsg_acc
