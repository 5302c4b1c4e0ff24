#ifndef GMG_COST_HPP
#define GMG_COST_HPP

#include "gmg/common.hpp"
#include "gmg/point_cloud.hpp"
#include "gmg/rng.hpp"

#include <string>

namespace gmg {

constexpr double kZeroVectorFloor = 1e-12;
constexpr double kScaleFloor = 1e-12;

enum class CostFamily {
  SquaredEuclidean,
  ScaledSquaredEuclidean,
  Cosine,
  InnerProduct,
};

inline const char* cost_family_name(CostFamily family) {
  switch (family) {
    case CostFamily::SquaredEuclidean: return "sqeuclidean";
    case CostFamily::ScaledSquaredEuclidean: return "scaled_sqeuclidean";
    case CostFamily::Cosine: return "cosine";
    case CostFamily::InnerProduct: return "inner_product";
  }
  return "?";
}

/// Intra-domain cost kernel. The scale of ScaledSquaredEuclidean is stored as
/// log_alpha so that alpha = exp(log_alpha) stays positive under unconstrained
/// gradient updates.
struct CostKernel {
  CostFamily family = CostFamily::SquaredEuclidean;
  double log_alpha = 0.0;

  double alpha() const { return std::exp(log_alpha); }
};

enum class StatKind { Mean, Max, Std, None };

inline const char* stat_kind_name(StatKind kind) {
  switch (kind) {
    case StatKind::Mean: return "mean";
    case StatKind::Max: return "max";
    case StatKind::Std: return "std";
    case StatKind::None: return "none";
  }
  return "?";
}

/// n-by-n evaluation of a kernel on a cloud, plus the statistic it was divided
/// by (scale = 1 when unscaled).
struct CostMatrix {
  Matrix values;
  CostKernel kernel;
  double scale = 1.0;
  StatKind stat_kind = StatKind::None;

  Eigen::Index size() const { return values.rows(); }
};

template <typename DerivedA, typename DerivedB>
double evaluate_kernel(const CostKernel& kernel, const Eigen::MatrixBase<DerivedA>& x,
                       const Eigen::MatrixBase<DerivedB>& y) {
  require(x.size() == y.size(), ErrorCode::DimensionMismatch,
          "kernel arguments have different dimensions");
  switch (kernel.family) {
    case CostFamily::SquaredEuclidean:
      return (x - y).squaredNorm();
    case CostFamily::ScaledSquaredEuclidean:
      return kernel.alpha() * (x - y).squaredNorm();
    case CostFamily::Cosine: {
      double nx = x.norm();
      double ny = y.norm();
      require(nx > kZeroVectorFloor && ny > kZeroVectorFloor,
              ErrorCode::ZeroVectorInCosine,
              "cosine cost undefined on (near-)zero vector");
      return (x.array() * y.array()).sum() / (nx * ny);
    }
    case CostFamily::InnerProduct:
      return (x.array() * y.array()).sum();
  }
  return 0.0;
}

/// Rows of the cloud normalized to unit length; the cosine cost matrix is the
/// inner-product matrix of these rows.
inline Matrix normalized_rows(const PointCloud& cloud) {
  Matrix out = cloud.points;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    double norm = out.row(i).norm();
    require(norm > kZeroVectorFloor, ErrorCode::ZeroVectorInCosine,
            "cosine cost undefined: row " + std::to_string(i) + " is (near-)zero");
    out.row(i) /= norm;
  }
  return out;
}

inline CostMatrix build_cost_matrix(const PointCloud& cloud, const CostKernel& kernel) {
  validate(cloud);
  const Eigen::Index n = cloud.size();
  CostMatrix result;
  result.kernel = kernel;
  switch (kernel.family) {
    case CostFamily::SquaredEuclidean:
    case CostFamily::ScaledSquaredEuclidean: {
      Vector sq = cloud.points.rowwise().squaredNorm();
      result.values = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                      2.0 * (cloud.points * cloud.points.transpose());
      // the expansion can leave -1e-16 on the diagonal
      result.values = result.values.cwiseMax(0.0);
      result.values.diagonal().setZero();
      if (kernel.family == CostFamily::ScaledSquaredEuclidean)
        result.values *= kernel.alpha();
      break;
    }
    case CostFamily::Cosine: {
      Matrix unit = normalized_rows(cloud);
      result.values = unit * unit.transpose();
      result.values.diagonal().setOnes();
      break;
    }
    case CostFamily::InnerProduct:
      result.values = cloud.points * cloud.points.transpose();
      break;
  }
  // symmetrize away rounding asymmetry from the matrix products
  result.values = ((result.values + result.values.transpose()) * 0.5).eval();
  return result;
}

inline double matrix_stat(const Matrix& values, StatKind kind) {
  switch (kind) {
    case StatKind::Mean:
      return values.mean();
    case StatKind::Max:
      return values.maxCoeff();
    case StatKind::Std: {
      // population standard deviation over all n^2 entries
      double mean = values.mean();
      double var = (values.array() - mean).square().mean();
      return std::sqrt(var);
    }
    case StatKind::None:
      return 1.0;
  }
  return 1.0;
}

/// Divides by the statistic over all n^2 entries and records it. The recorded
/// scale is treated as a constant under differentiation.
inline CostMatrix rescale_by_stat(const CostMatrix& matrix, StatKind kind) {
  require(kind != StatKind::None, ErrorCode::DegenerateScale,
          "rescale_by_stat requires one of {mean, max, std}");
  double s = matrix_stat(matrix.values, kind);
  require(std::isfinite(s) && s > kScaleFloor, ErrorCode::DegenerateScale,
          "cost-matrix statistic " + std::string(stat_kind_name(kind)) +
              " = " + format_double(s) + " is not usable as a scale");
  CostMatrix out = matrix;
  out.values /= s;
  out.scale = matrix.scale * s;
  out.stat_kind = kind;
  return out;
}

struct CpdReport {
  bool all_passed = true;
  int trials = 0;
  int violations = 0;
  double min_quadratic_form = 0.0;
};

/// Randomized certificate that +/-kernel is conditionally positive definite on
/// the cloud: samples zero-sum weight vectors a and checks the quadratic form
/// sum_ij a_i a_j k(x_i, x_j) >= -tol. Sign is +1 for InnerProduct/Cosine and
/// -1 for (Scaled)SquaredEuclidean. A sampling diagnostic, not a proof.
inline CpdReport check_cpd(const CostKernel& kernel, const PointCloud& cloud, int trials,
                           std::uint64_t seed = 0, double tol = 1e-9) {
  require(trials >= 1, ErrorCode::DimensionMismatch, "check_cpd requires trials >= 1");
  CostMatrix cost = build_cost_matrix(cloud, kernel);
  double sign = (kernel.family == CostFamily::SquaredEuclidean ||
                 kernel.family == CostFamily::ScaledSquaredEuclidean)
                    ? -1.0
                    : 1.0;
  Matrix k = sign * cost.values;
  double threshold = -tol * (1.0 + k.cwiseAbs().maxCoeff());

  Rng rng(seed);
  CpdReport report;
  report.trials = trials;
  report.min_quadratic_form = std::numeric_limits<double>::infinity();
  const Eigen::Index n = cloud.size();
  for (int t = 0; t < trials; ++t) {
    Vector a = rng.normal_vector(n);
    a.array() -= a.mean();  // a' 1 = 0
    double q = a.dot(k * a);
    report.min_quadratic_form = std::min(report.min_quadratic_form, q);
    if (q < threshold) ++report.violations;
  }
  report.all_passed = report.violations == 0;
  return report;
}

}  // namespace gmg

#endif  // GMG_COST_HPP
