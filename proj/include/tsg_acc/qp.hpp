#pragma once

/**
 * @file
 * @brief Dense convex QP solver.
 *
 *   minimize    1/2 z' H z + g' z
 *   subject to  A z <= b,  lb <= z <= ub
 *
 * Operator splitting (ADMM) with over-relaxation, Ruiz equilibration and
 * adaptive penalty, followed by a polishing solve of the KKT system on the
 * identified active set. A polished point is accepted only if its KKT
 * residual on the original problem is within tolerance.
 */

#include <Eigen/Dense>
#include <optional>
#include <string_view>

namespace tsg_acc {

struct DenseQp
{
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  /// Unconstrained problem of size n (no rows, infinite bounds).
  static DenseQp unconstrained(const Eigen::MatrixXd& H, const Eigen::VectorXd& g);

  Eigen::Index n() const { return H.rows(); }
  Eigen::Index m() const { return A.rows(); }
  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H * z) + g.dot(z); }
  /// Throws std::invalid_argument on inconsistent dimensions, asymmetric H or lb > ub.
  void validate() const;
};

enum class QpStatus { Optimal, MaxIter, Infeasible };

std::string_view to_string(QpStatus s);

struct QpSettings
{
  /// KKT tolerance, relative to 1 + the largest entry of (g, b, H z)
  double tol{1e-6};
  int max_iter{4000};
  /// diagonal proximal term sigma added to H
  double regularization{1e-8};
  double rho{0.1};
  double alpha{1.6};
  bool polish{true};
  /// tolerance of the primal infeasibility certificate
  double infeasibility_tol{1e-6};
  int check_every{5};
};

struct QpSolution
{
  Eigen::VectorXd z;
  /// multipliers of A z <= b (>= 0)
  Eigen::VectorXd lam;
  /// bound multipliers, > 0 at the upper bound and < 0 at the lower bound
  Eigen::VectorXd mu;
  QpStatus status{QpStatus::MaxIter};
  int iterations{0};
  double kkt_residual{0};
  bool polished{false};
};

/**
 * @brief Largest of stationarity, primal violation, complementarity and dual
 * infeasibility at (z, lam, mu).
 */
double kkt_residual(const DenseQp& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& lam, const Eigen::VectorXd& mu);

/// As above with the bound multipliers chosen to minimize the residual.
double kkt_residual(const DenseQp& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& lam);

/// Lagrangian dual objective at (lam, mu) evaluated through the stationary z.
double dual_objective(const DenseQp& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& lam, const Eigen::VectorXd& mu);

/**
 * @brief Solver instance owning its factorization workspace.
 *
 * Not thread-safe; use one instance per concurrent caller.
 */
class QpSolver
{
public:
  explicit QpSolver(QpSettings settings = {}) : settings_(settings) {}

  const QpSettings& settings() const { return settings_; }
  void set_settings(const QpSettings& s) { settings_ = s; }

  /// Solve, optionally warm-started from a previous primal/dual pair of the same size.
  QpSolution solve(const DenseQp& qp, const QpSolution* warm = nullptr);

private:
  QpSettings settings_;
};

/// Convenience wrapper around a temporary QpSolver.
QpSolution solve(const DenseQp& qp, const QpSettings& settings = {});

}  // namespace tsg_acc
