#ifndef GMG_SINKHORN_HPP
#define GMG_SINKHORN_HPP

#include "gmg/common.hpp"
#include "gmg/cost.hpp"
#include "gmg/point_cloud.hpp"

#include <optional>
#include <utility>

namespace gmg {

/// Entropic transport plan with uniform marginals 1/n. The plan satisfies
/// plan(i,j) = (1/n^2) * exp((f_i + g_j - cost(i,j)) / epsilon).
struct Coupling {
  Matrix plan;
  Vector f;
  Vector g;
  double epsilon = 0.0;
  int iterations_used = 0;
  double marginal_error = 0.0;
  bool converged = false;
};

struct SinkhornConfig {
  double epsilon = 0.1;
  int max_iterations = 2000;
  double tolerance = 1e-6;  // L-inf deviation of row/column sums from 1/n
  std::optional<std::pair<Vector, Vector>> warm_start_potentials;
};

namespace detail {

/// Row-wise log-sum-exp of (g_j - cost(i,j))/eps, the update kernel for f.
inline Vector lse_rows(const Matrix& cost, const Vector& g, double eps, Matrix& z) {
  z = (((-cost).rowwise() + g.transpose()) / eps).eval();
  Vector m = z.rowwise().maxCoeff();
  Vector sums = (z.colwise() - m).array().exp().matrix().rowwise().sum();
  return m + sums.array().log().matrix();
}

/// Column-wise log-sum-exp of (f_i - cost(i,j))/eps, the update kernel for g.
inline Vector lse_cols(const Matrix& cost, const Vector& f, double eps, Matrix& z) {
  z = (((-cost).colwise() + f) / eps).eval();
  Vector m = z.colwise().maxCoeff().transpose();
  Vector sums =
      (z.rowwise() - m.transpose()).array().exp().matrix().colwise().sum().transpose();
  return m + sums.array().log().matrix();
}

}  // namespace detail

/// Log-domain Sinkhorn for uniform marginals a = b = (1/n) 1_n, alternating
/// exact log-sum-exp updates of the potentials. Never forms multiplicative
/// scalings, so it survives small epsilon. Non-convergence is reported as a
/// flag in the result, not an error.
inline Coupling sinkhorn_solve(const Matrix& cost, const SinkhornConfig& config) {
  require(cost.rows() == cost.cols(), ErrorCode::DimensionMismatch,
          "sinkhorn_solve expects a square cost matrix");
  require(cost.rows() >= 1, ErrorCode::DimensionMismatch, "empty cost matrix");
  require(all_finite(cost), ErrorCode::NonFiniteCost, "cost matrix has non-finite entries");
  require(config.epsilon > 0.0 && config.tolerance > 0.0, ErrorCode::DimensionMismatch,
          "sinkhorn config requires epsilon > 0 and tolerance > 0");

  const Eigen::Index n = cost.rows();
  const double eps = config.epsilon;
  const double log_n = std::log(static_cast<double>(n));
  const double inv_n = 1.0 / static_cast<double>(n);

  Coupling result;
  result.epsilon = eps;

  if (n == 1) {
    result.plan = Matrix::Ones(1, 1);
    result.f = Vector::Zero(1);
    result.g = Vector::Constant(1, cost(0, 0));  // f + g - c = 0 at the unique coupling
    result.marginal_error = 0.0;
    result.converged = true;
    return result;
  }

  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(n);
  if (config.warm_start_potentials) {
    f = config.warm_start_potentials->first;
    g = config.warm_start_potentials->second;
    require(f.size() == n && g.size() == n, ErrorCode::DimensionMismatch,
            "warm-start potentials have wrong size");
  }

  int iterations = 0;
  double error = std::numeric_limits<double>::infinity();
  Matrix workspace(n, n);
  // row_lse tracks lse_rows for the current g, shared between the convergence
  // check of one iteration and the f update of the next
  Vector row_lse = detail::lse_rows(cost, g, eps, workspace);
  while (iterations < config.max_iterations) {
    ++iterations;
    f = -eps * (row_lse.array() - log_n);
    g = -eps * (detail::lse_cols(cost, f, eps, workspace).array() - log_n);
    // after the g update the column sums are exact; the residual lives in rows
    row_lse = detail::lse_rows(cost, g, eps, workspace);
    Vector row_sums = ((row_lse + f / eps).array() - 2.0 * log_n).exp().matrix();
    error = (row_sums.array() - inv_n).abs().maxCoeff();
    if (error <= config.tolerance) break;
  }

  Matrix log_plan = (((-cost).colwise() + f).rowwise() + g.transpose()) / eps;
  result.plan = (log_plan.array() - 2.0 * log_n).exp().matrix();
  result.f = f;
  result.g = g;
  result.iterations_used = iterations;
  result.converged = error <= config.tolerance;

  Vector row_sums = result.plan.rowwise().sum();
  Vector col_sums = result.plan.colwise().sum();
  result.marginal_error =
      std::max((row_sums.array() - inv_n).abs().maxCoeff(),
               (col_sums.array() - inv_n).abs().maxCoeff());
  return result;
}

/// Entropy H(P) = -sum P log P with 0 log 0 := 0.
inline double plan_entropy(const Matrix& plan) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < plan.cols(); ++j)
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
      double p = plan(i, j);
      if (p > 0.0) h -= p * std::log(p);
    }
  return h;
}

/// Transport term <cost, plan>.
inline double transport_cost(const Coupling& coupling, const Matrix& cost) {
  require(coupling.plan.rows() == cost.rows() && coupling.plan.cols() == cost.cols(),
          ErrorCode::DimensionMismatch, "coupling and cost dimensions differ");
  return (coupling.plan.array() * cost.array()).sum();
}

/// Full entropic objective <cost, plan> - epsilon * H(plan).
inline double entropic_ot_value(const Coupling& coupling, const Matrix& cost) {
  return transport_cost(coupling, cost) - coupling.epsilon * plan_entropy(coupling.plan);
}

inline Matrix squared_euclidean_cross_cost(const Matrix& a, const Matrix& b) {
  Vector sa = a.rowwise().squaredNorm();
  Vector sb = b.rowwise().squaredNorm();
  Matrix out = sa.replicate(1, b.rows()) + sb.transpose().replicate(a.rows(), 1) -
               2.0 * (a * b.transpose());
  return out.cwiseMax(0.0);
}

/// Debiased Sinkhorn divergence with squared-Euclidean ground cost:
/// OT_eps(p,q) - OT_eps(p,p)/2 - OT_eps(q,q)/2, where each OT_eps term is the
/// transport cost <C, P> at the entropic optimum (the entropy term enters the
/// solve, not the reported value). Zero between identical clouds.
inline double sinkhorn_divergence(const PointCloud& source, const PointCloud& target,
                                  double epsilon, const SinkhornConfig& base = {}) {
  require(source.dim() == target.dim(), ErrorCode::DimensionMismatch,
          "sinkhorn_divergence: clouds have different ambient dimensions");
  require(source.size() == target.size(), ErrorCode::DimensionMismatch,
          "sinkhorn_divergence: clouds have different sizes");
  SinkhornConfig config = base;
  config.epsilon = epsilon;
  config.warm_start_potentials.reset();

  Matrix c_pq = squared_euclidean_cross_cost(source.points, target.points);
  Matrix c_pp = squared_euclidean_cross_cost(source.points, source.points);
  Matrix c_qq = squared_euclidean_cross_cost(target.points, target.points);

  double ot_pq = transport_cost(sinkhorn_solve(c_pq, config), c_pq);
  double ot_pp = transport_cost(sinkhorn_solve(c_pp, config), c_pp);
  double ot_qq = transport_cost(sinkhorn_solve(c_qq, config), c_qq);
  return ot_pq - 0.5 * ot_pp - 0.5 * ot_qq;
}

}  // namespace gmg

#endif  // GMG_SINKHORN_HPP
