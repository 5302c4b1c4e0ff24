#ifndef GMG_GMG_HPP
#define GMG_GMG_HPP

#include "gmg/common.hpp"
#include "gmg/cost.hpp"
#include "gmg/gw.hpp"
#include "gmg/linalg.hpp"
#include "gmg/point_cloud.hpp"
#include "gmg/rng.hpp"

#include <optional>
#include <vector>

namespace gmg {

/// Average squared difference between source-side and mapped-side costs,
/// on raw (unrescaled) matrices.
inline double distortion(const PointCloud& source, const PointCloud& mapped,
                         const CostKernel& kx, const CostKernel& ky) {
  require(source.size() == mapped.size(), ErrorCode::DimensionMismatch,
          "distortion: source and mapped clouds differ in size");
  Matrix cx = build_cost_matrix(source, kx).values;
  Matrix cy = build_cost_matrix(mapped, ky).values;
  return (cx - cy).array().square().mean();
}

struct PointGradient {
  Matrix mapped_gradient;                  // n x d_Y, d/d t_j
  std::optional<double> log_alpha_gradient;  // set for ScaledSquaredEuclidean c_Y
};

namespace detail {

/// Chain rule from a sensitivity W = dF/dC_Y (raw cost units, symmetric) to
/// the mapped points, for each kernel family. cy_raw must hold the raw cost
/// matrix of `mapped` under `ky`.
inline PointGradient chain_cost_gradient(const Matrix& weights, const PointCloud& mapped,
                                         const CostKernel& ky, const Matrix& cy_raw) {
  const Eigen::Index n = mapped.size();
  PointGradient out;
  switch (ky.family) {
    case CostFamily::SquaredEuclidean:
    case CostFamily::ScaledSquaredEuclidean: {
      double alpha = ky.family == CostFamily::ScaledSquaredEuclidean ? ky.alpha() : 1.0;
      Vector row_sums = weights.rowwise().sum();
      out.mapped_gradient =
          4.0 * alpha *
          (row_sums.asDiagonal() * mapped.points - weights * mapped.points);
      if (ky.family == CostFamily::ScaledSquaredEuclidean)
        out.log_alpha_gradient = (weights.array() * cy_raw.array()).sum();
      break;
    }
    case CostFamily::InnerProduct:
      out.mapped_gradient = 2.0 * (weights * mapped.points);
      break;
    case CostFamily::Cosine: {
      Matrix unit = normalized_rows(mapped);
      Vector norms = mapped.points.rowwise().norm();
      Matrix off = weights;
      off.diagonal().setZero();  // the cosine diagonal is constant 1
      Vector cos_sums = (off.array() * cy_raw.array()).rowwise().sum();
      Matrix grad = 2.0 * (off * unit - cos_sums.asDiagonal() * unit);
      out.mapped_gradient = norms.cwiseInverse().asDiagonal() * grad;
      break;
    }
  }
  return out;
}

}  // namespace detail

/// Exact gradient of the distortion with respect to the mapped points (and
/// log_alpha when c_Y is the scaled squared distance).
inline PointGradient distortion_gradient(const PointCloud& source, const PointCloud& mapped,
                                         const CostKernel& kx, const CostKernel& ky) {
  require(source.size() == mapped.size(), ErrorCode::DimensionMismatch,
          "distortion_gradient: source and mapped clouds differ in size");
  const double n = static_cast<double>(source.size());
  Matrix cx = build_cost_matrix(source, kx).values;
  Matrix cy = build_cost_matrix(mapped, ky).values;
  Matrix weights = (2.0 / (n * n)) * (cy - cx);
  return detail::chain_cost_gradient(weights, mapped, ky, cy);
}

struct GmgReport {
  double dst = 0.0;
  double gw_value = 0.0;
  double gmg = 0.0;  // dst - gw_value, same arithmetic path
  double scale_x = 1.0;
  double scale_y = 1.0;
  double epsilon_used = 0.0;  // raw-cost units: epsilon0 * scale_x * scale_y
  int solver_outer_iterations = 0;
  bool solver_converged = false;
};

/// Report plus everything needed to differentiate it afterwards; a report and
/// its gradient always come from the same solve.
struct GmgSolution {
  GmgReport report;
  GwResult gw;
  GwGeometry geometry_x;
  GwGeometry geometry_y;
  CostKernel kernel_x;
  CostKernel kernel_y;
  PointCloud mapped;
};

/// Runs the full estimation pipeline: build both cost matrices, rescale by the
/// configured statistic, solve entropic GW on the rescaled costs at epsilon0,
/// and report dst / gw / gmg multiplied back into raw-cost units by the scale
/// product. Scales and epsilon are treated as constants under differentiation.
inline GmgSolution gmg_solve(const PointCloud& source, const PointCloud& mapped,
                             const CostKernel& kx, const CostKernel& ky,
                             const GwConfig& config,
                             std::optional<std::pair<double, double>> frozen_scales =
                                 std::nullopt,
                             const GwWarmStart* warm = nullptr) {
  require(source.size() == mapped.size() && source.size() >= 2,
          ErrorCode::DimensionMismatch,
          "gmg requires equally sized clouds with n >= 2");
  GmgSolution solution;
  solution.geometry_x = make_geometry(
      source, kx, config.stat_kind,
      frozen_scales ? std::optional<double>(frozen_scales->first) : std::nullopt);
  solution.geometry_y = make_geometry(
      mapped, ky, config.stat_kind,
      frozen_scales ? std::optional<double>(frozen_scales->second) : std::nullopt);
  solution.kernel_x = kx;
  solution.kernel_y = ky;
  solution.mapped = mapped;

  double dst_rescaled = (solution.geometry_x.cost.values - solution.geometry_y.cost.values)
                            .array()
                            .square()
                            .mean();
  solution.gw = gw_solve_entropic(solution.geometry_x, solution.geometry_y, config, warm);

  const double scale_product = solution.gw.scale_x * solution.gw.scale_y;
  GmgReport& report = solution.report;
  report.scale_x = solution.gw.scale_x;
  report.scale_y = solution.gw.scale_y;
  report.epsilon_used = config.epsilon0 * scale_product;
  report.dst = dst_rescaled * scale_product;
  report.gw_value = solution.gw.entropic_value * scale_product;
  report.gmg = report.dst - report.gw_value;
  report.solver_outer_iterations = solution.gw.outer_iterations;
  report.solver_converged = solution.gw.converged;
  return solution;
}

inline GmgReport gmg_from_samples(const PointCloud& source, const PointCloud& mapped,
                                  const CostKernel& kx, const CostKernel& ky,
                                  const GwConfig& config,
                                  std::optional<std::pair<double, double>> frozen_scales =
                                      std::nullopt,
                                  const GwWarmStart* warm = nullptr) {
  return gmg_solve(source, mapped, kx, ky, config, frozen_scales, warm).report;
}

/// Envelope gradient of the gmg value in raw-cost units: the optimal plan,
/// both scales, and epsilon are held fixed; only c_Y(t_j, t_j') depends on the
/// mapped points. Refused when the GW solve did not converge, since the
/// envelope argument needs a stationary plan.
inline PointGradient gmg_gradient(const GmgSolution& solution) {
  require(solution.report.solver_converged, ErrorCode::NotConverged,
          "gmg_gradient refused: GW solve did not converge");
  const Matrix& plan = solution.gw.plan.plan;
  const Matrix& cx = solution.geometry_x.cost.values;
  const Eigen::Index n = plan.rows();
  const double inv_n2 = 1.0 / static_cast<double>(n * n);

  // d gmg~ / d C_Y~ = 2 (P' Cx~ P - Cx~ / n^2); the C_Y~ terms of dst and the
  // quadratic objective cancel. Back in raw units this picks up scale_x.
  Matrix weights = 2.0 * (plan.transpose() * cx * plan - inv_n2 * cx);
  weights *= solution.gw.scale_x;

  Matrix cy_raw = build_cost_matrix(solution.mapped, solution.kernel_y).values;
  return detail::chain_cost_gradient(weights, solution.mapped, solution.kernel_y, cy_raw);
}

inline PointGradient gmg_gradient(const PointCloud& source, const PointCloud& mapped,
                                  const CostKernel& kx, const CostKernel& ky,
                                  const GwConfig& config) {
  return gmg_gradient(gmg_solve(source, mapped, kx, ky, config));
}

struct RestrictionReport {
  double full_gmg = 0.0;
  double restricted_gmg = 0.0;
  double tol = 0.0;
  double restricted_tol = 0.0;  // 10 * tol, absorbs entropic bias
  bool full_below_tol = false;
  bool passed = true;  // vacuously true when the full gmg is not below tol
};

/// Zero-gmg restriction check: when the map moves the full cloud with minimal
/// distortion, the same map restricted to a subset must as well.
inline RestrictionReport check_restriction_property(
    const PointCloud& source, const PointCloud& mapped,
    const std::vector<int>& subset_indices, const CostKernel& kx, const CostKernel& ky,
    const GwConfig& config, double tol) {
  require(!subset_indices.empty(), ErrorCode::DimensionMismatch,
          "restriction check needs a nonempty subset");
  for (int idx : subset_indices)
    require(idx >= 0 && idx < source.size(), ErrorCode::DimensionMismatch,
            "subset index out of range");

  RestrictionReport report;
  report.tol = tol;
  report.restricted_tol = 10.0 * tol;
  report.full_gmg = gmg_from_samples(source, mapped, kx, ky, config).gmg;

  Matrix sub_source(subset_indices.size(), source.dim());
  Matrix sub_mapped(subset_indices.size(), mapped.dim());
  for (std::size_t k = 0; k < subset_indices.size(); ++k) {
    sub_source.row(k) = source.points.row(subset_indices[k]);
    sub_mapped.row(k) = mapped.points.row(subset_indices[k]);
  }
  report.restricted_gmg =
      gmg_from_samples(PointCloud(sub_source), PointCloud(sub_mapped), kx, ky, config).gmg;

  report.full_below_tol = report.full_gmg < tol;
  report.passed = !report.full_below_tol || report.restricted_gmg < report.restricted_tol;
  return report;
}

struct ConvexityReport {
  double gamma_inner_n = 0.0;  // spectral width of (1/n) X X'
  double gamma_two_n = 0.0;    // gamma_inner_n + max_i |x_i|^2
  std::string spectrum_method;
};

/// Weak-convexity constants of the gmg estimator seen as a function of the
/// mapped matrix. For n > d the Gram matrix (1/n) X X' is rank deficient, so
/// its smallest eigenvalue is set to zero exactly rather than estimated.
inline ConvexityReport weak_convexity_constants(const PointCloud& source) {
  validate(source);
  const Eigen::Index n = source.size();
  const Eigen::Index d = source.dim();
  ConvexityReport report;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  if (n > d) {
    Matrix cov = (source.points.transpose() * source.points) / static_cast<double>(n);
    Vector eig = jacobi_eigenvalues(cov, 1e-10);
    lambda_max = eig(eig.size() - 1);
    lambda_min = 0.0;
    report.spectrum_method = "cyclic_jacobi on (1/n) X'X (d x d); lambda_min = 0 by rank";
  } else {
    Matrix gram = (source.points * source.points.transpose()) / static_cast<double>(n);
    Vector eig = jacobi_eigenvalues(gram, 1e-10);
    lambda_max = eig(eig.size() - 1);
    lambda_min = eig(0);
    report.spectrum_method = "cyclic_jacobi on (1/n) XX' (n x n)";
  }
  report.gamma_inner_n = lambda_max - lambda_min;
  report.gamma_two_n =
      report.gamma_inner_n + source.points.rowwise().squaredNorm().maxCoeff();
  return report;
}

struct ChordTestReport {
  int trials = 0;
  int violations = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();
};

/// Samples random chords in map space and checks the convexity inequality for
/// F(T) = gmg(T) + (gamma/2) (1/n) |T|_F^2, with gmg in shannon mode. The
/// (1/n)-scaled Frobenius norm matches the L2(r_n) norm of the map.
inline ChordTestReport chord_convexity_test(const PointCloud& source, const CostKernel& kx,
                                            const CostKernel& ky, double gamma, int trials,
                                            const GwConfig& config_in,
                                            std::uint64_t seed = 0,
                                            Eigen::Index mapped_dim = 0,
                                            double map_spread = 1.0) {
  require(gamma >= 0.0, ErrorCode::DimensionMismatch, "gamma must be nonnegative");
  GwConfig config = config_in;
  config.entropy_mode = EntropyMode::Shannon;

  const Eigen::Index n = source.size();
  const Eigen::Index d = mapped_dim > 0 ? mapped_dim : source.dim();
  Rng rng(seed);
  ChordTestReport report;
  report.trials = trials;

  auto objective = [&](const Matrix& t) {
    PointCloud mapped(t);
    double value = gmg_from_samples(source, mapped, kx, ky, config).gmg;
    return value + 0.5 * gamma * t.squaredNorm() / static_cast<double>(n);
  };

  for (int trial = 0; trial < trials; ++trial) {
    Matrix a = map_spread * rng.normal_matrix(n, d);
    Matrix b = map_spread * rng.normal_matrix(n, d);
    double lambda = rng.uniform();
    Matrix mid = lambda * a + (1.0 - lambda) * b;
    double fa = objective(a);
    double fb = objective(b);
    double fm = objective(mid);
    double slack = 1e-6 * (1.0 + std::abs(fa) + std::abs(fb));
    double gap = fm - (lambda * fa + (1.0 - lambda) * fb);
    report.worst_gap = std::max(report.worst_gap, gap);
    if (gap > slack) ++report.violations;
  }
  return report;
}

}  // namespace gmg

#endif  // GMG_GMG_HPP
