#ifndef GMG_GW_HPP
#define GMG_GW_HPP

#include "gmg/common.hpp"
#include "gmg/cost.hpp"
#include "gmg/point_cloud.hpp"
#include "gmg/sinkhorn.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

namespace gmg {

enum class EntropyMode { Shannon, Offset2LogN };

inline const char* entropy_mode_name(EntropyMode mode) {
  return mode == EntropyMode::Shannon ? "shannon" : "offset_2logn";
}

struct GwConfig {
  double epsilon0 = 0.1;
  StatKind stat_kind = StatKind::Mean;
  int max_outer = 50;
  double outer_tolerance = 1e-5;  // Frobenius change of the plan
  SinkhornConfig inner;           // inner.epsilon is set by the solver
  std::optional<bool> use_factored_path;  // unset: auto by kernel family
  EntropyMode entropy_mode = EntropyMode::Offset2LogN;
};

struct GwOuterStep {
  int outer = 0;
  double objective = 0.0;  // quadratic_value - epsilon0 * H(plan)
  double plan_delta = 0.0;
  double marginal_error = 0.0;
  int inner_iterations = 0;
};

struct GwResult {
  Coupling plan;
  double quadratic_value = 0.0;
  double entropic_value = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  bool inner_all_converged = true;
  double scale_x = 1.0;
  double scale_y = 1.0;
  std::vector<GwOuterStep> trace;
};

/// Low-rank structure of a cost matrix: C = z 1' + 1 z' + gram_coeff * F F'.
/// Lets the linearized cost be formed in O(n^2 (d_X + d_Y)) instead of O(n^3).
struct CostFactors {
  Matrix factor;       // n x d
  Vector z;            // n, zero for the gram-only families
  double gram_coeff = 1.0;
};

/// Cost matrix together with the factorization of the same (rescaled) values,
/// available for all four kernel families when built from a point cloud.
struct GwGeometry {
  CostMatrix cost;
  std::optional<CostFactors> factors;
};

/// Builds the cost matrix for the cloud, rescales it by `stat`, and attaches
/// the matching factorization. Cosine reduces to the inner product on
/// pre-normalized rows. A frozen scale divides the costs by that fixed value
/// instead of the live statistic (the stop-gradient semantics of the
/// estimator, needed when probing the value function around a base point).
inline GwGeometry make_geometry(const PointCloud& cloud, const CostKernel& kernel,
                                StatKind stat,
                                std::optional<double> frozen_scale = std::nullopt) {
  GwGeometry geometry;
  geometry.cost = build_cost_matrix(cloud, kernel);
  if (frozen_scale) {
    require(*frozen_scale > kScaleFloor, ErrorCode::DegenerateScale,
            "frozen scale must be positive");
    geometry.cost.values /= *frozen_scale;
    geometry.cost.scale = *frozen_scale;
    geometry.cost.stat_kind = stat;
  } else if (stat != StatKind::None) {
    geometry.cost = rescale_by_stat(geometry.cost, stat);
  }
  const double s = geometry.cost.scale;

  CostFactors factors;
  switch (kernel.family) {
    case CostFamily::SquaredEuclidean:
    case CostFamily::ScaledSquaredEuclidean: {
      double alpha = kernel.family == CostFamily::ScaledSquaredEuclidean
                         ? kernel.alpha()
                         : 1.0;
      factors.factor = cloud.points;
      factors.z = (alpha / s) * cloud.points.rowwise().squaredNorm();
      factors.gram_coeff = -2.0 * alpha / s;
      break;
    }
    case CostFamily::Cosine:
      factors.factor = normalized_rows(cloud);
      factors.z = Vector::Zero(cloud.size());
      factors.gram_coeff = 1.0 / s;
      break;
    case CostFamily::InnerProduct:
      factors.factor = cloud.points;
      factors.z = Vector::Zero(cloud.size());
      factors.gram_coeff = 1.0 / s;
      break;
  }
  geometry.factors = factors;
  return geometry;
}

namespace detail {

/// cx * plan * cy through the factorizations, O(n^2 (d_X + d_Y)).
inline Matrix cross_term_factored(const CostFactors& fx, const CostFactors& fy,
                                  const Matrix& plan) {
  const Eigen::Index n = plan.rows();
  Vector col_mass = plan.colwise().sum().transpose();

  // a = cx * plan = zx (1' plan) + 1 (zx' plan) + cxf Fx (Fx' plan)
  Vector zxp = plan.transpose() * fx.z;                    // (zx' plan)'
  Matrix fxp = plan.transpose() * fx.factor;               // (Fx' plan)'
  // b = a * cy, assembled per structural piece of cy
  // piece 1: a * (zy 1') = (a zy) 1'
  // piece 2: a * (1 zy') = (a 1) zy'
  // piece 3: a * cyf Fy Fy' = cyf (a Fy) Fy'
  auto apply_a = [&](const Matrix& rhs) -> Matrix {
    // a * rhs without forming a
    return fx.z * (col_mass.transpose() * rhs) +
           Vector::Ones(n) * (zxp.transpose() * rhs) +
           fx.gram_coeff * (fx.factor * (fxp.transpose() * rhs));
  };
  Vector a_zy = apply_a(fy.z);
  Vector a_one = apply_a(Matrix::Ones(n, 1));
  Matrix a_fy = apply_a(fy.factor);

  Matrix out = a_zy * Eigen::RowVectorXd::Ones(n);
  out.noalias() += a_one * fy.z.transpose();
  out.noalias() += fy.gram_coeff * (a_fy * fy.factor.transpose());
  return out;
}

}  // namespace detail

/// Linearized cost whose Sinkhorn solution is the next outer iterate:
/// L(P)_ij = [cx^2 r]_i + [cy^2 c]_j - 2 [cx P cy]_ij with r, c the plan
/// marginals. <L(P), P> equals the quadratic objective at P. Generic O(n^3).
inline Matrix gw_linearized_cost(const Matrix& cx, const Matrix& cy, const Matrix& plan) {
  require(cx.rows() == cx.cols() && cy.rows() == cy.cols(), ErrorCode::DimensionMismatch,
          "cost matrices must be square");
  require(cx.rows() == plan.rows() && cy.rows() == plan.cols(),
          ErrorCode::DimensionMismatch, "plan shape does not match cost matrices");
  Vector r = plan.rowwise().sum();
  Vector c = plan.colwise().sum().transpose();
  Vector row_const = cx.array().square().matrix() * r;
  Vector col_const = cy.array().square().matrix() * c;
  Matrix cross = cx * plan * cy;
  Matrix out = (-2.0 * cross).colwise() + row_const;
  out.rowwise() += col_const.transpose();
  return out;
}

/// Factored-path variant; agrees with the generic path entrywise.
inline Matrix gw_linearized_cost(const GwGeometry& gx, const GwGeometry& gy,
                                 const Matrix& plan) {
  if (!gx.factors || !gy.factors)
    return gw_linearized_cost(gx.cost.values, gy.cost.values, plan);
  require(gx.cost.size() == plan.rows() && gy.cost.size() == plan.cols(),
          ErrorCode::DimensionMismatch, "plan shape does not match cost matrices");
  Vector r = plan.rowwise().sum();
  Vector c = plan.colwise().sum().transpose();
  Vector row_const = gx.cost.values.array().square().matrix() * r;
  Vector col_const = gy.cost.values.array().square().matrix() * c;
  Matrix cross = detail::cross_term_factored(*gx.factors, *gy.factors, plan);
  Matrix out = (-2.0 * cross).colwise() + row_const;
  out.rowwise() += col_const.transpose();
  return out;
}

/// Quadratic distortion objective sum_{iji'j'} (cx_ii' - cy_jj')^2 P_ij P_i'j',
/// evaluated through the expanded form.
inline double gw_quadratic_value(const Matrix& cx, const Matrix& cy, const Matrix& plan) {
  Matrix lin = gw_linearized_cost(cx, cy, plan);
  double value = (lin.array() * plan.array()).sum();
  // the expansion can produce -1e-17 for exactly matching geometries
  return value < 0.0 && value > -1e-12 ? 0.0 : value;
}

struct GwWarmStart {
  Matrix plan;
  Vector f;
  Vector g;
};

/// Entropic Gromov-Wasserstein solver: iterates Sinkhorn on the linearized
/// cost with warm-started potentials, from the uniform product plan, until the
/// plan stops moving. The inner Sinkhorn runs at epsilon0/2 so that the fixed
/// point is a stationary point of (quadratic objective) - epsilon0 * H(P); the
/// reported entropic value and the envelope gradients taken at the plan are
/// then mutually consistent.
inline GwResult gw_solve_entropic(const GwGeometry& gx_in, const GwGeometry& gy_in,
                                  const GwConfig& config,
                                  const GwWarmStart* warm = nullptr) {
  GwGeometry gx = gx_in;
  GwGeometry gy = gy_in;
  auto ensure_scaled = [&](GwGeometry& g) {
    if (config.stat_kind == StatKind::None || g.cost.stat_kind == config.stat_kind)
      return;
    require(g.cost.stat_kind == StatKind::None, ErrorCode::DegenerateScale,
            "cost matrix already rescaled with a different statistic");
    double before = g.cost.scale;
    g.cost = rescale_by_stat(g.cost, config.stat_kind);
    if (g.factors) {
      double applied = g.cost.scale / before;
      g.factors->z /= applied;
      g.factors->gram_coeff /= applied;
    }
  };
  ensure_scaled(gx);
  ensure_scaled(gy);

  const Eigen::Index n = gx.cost.size();
  require(n == gy.cost.size(), ErrorCode::DimensionMismatch,
          "gw_solve_entropic requires cost matrices of equal size");
  require(config.epsilon0 > 0.0 && config.max_outer >= 1, ErrorCode::DimensionMismatch,
          "gw config requires epsilon0 > 0 and max_outer >= 1");

  const bool factored = config.use_factored_path.value_or(
      gx.factors.has_value() && gy.factors.has_value());
  require(!factored || (gx.factors && gy.factors), ErrorCode::DimensionMismatch,
          "factored path requested but factorization unavailable");

  const double eps0 = config.epsilon0;
  GwResult result;
  result.scale_x = gx.cost.scale;
  result.scale_y = gy.cost.scale;

  Matrix plan = warm ? warm->plan
                     : Matrix::Constant(n, n, 1.0 / static_cast<double>(n * n));
  SinkhornConfig inner = config.inner;
  inner.epsilon = eps0 / 2.0;
  if (warm) inner.warm_start_potentials = {warm->f, warm->g};

  Coupling coupling;
  coupling.plan = plan;
  coupling.epsilon = inner.epsilon;

  const double log_n = std::log(static_cast<double>(n));
  bool outer_converged = false;
  int outer = 0;
  for (outer = 1; outer <= config.max_outer; ++outer) {
    Matrix lin = factored ? gw_linearized_cost(gx, gy, plan)
                          : gw_linearized_cost(gx.cost.values, gy.cost.values, plan);

    GwOuterStep step;
    step.outer = outer;
    // objective of the incoming iterate; <L(P), P> is the quadratic value at P
    step.objective = (lin.array() * plan.array()).sum() - eps0 * plan_entropy(plan);

    coupling = sinkhorn_solve(lin, inner);
    result.inner_all_converged = result.inner_all_converged && coupling.converged;
    inner.warm_start_potentials = {coupling.f, coupling.g};

    double delta = (coupling.plan - plan).norm();
    plan = coupling.plan;
    step.plan_delta = delta;
    step.marginal_error = coupling.marginal_error;
    step.inner_iterations = coupling.iterations_used;
    result.trace.push_back(step);

    if (delta < config.outer_tolerance) {
      outer_converged = true;
      break;
    }
  }

  result.outer_iterations = std::min(outer, config.max_outer);
  result.quadratic_value = factored
                               ? (gw_linearized_cost(gx, gy, plan).array() * plan.array()).sum()
                               : gw_quadratic_value(gx.cost.values, gy.cost.values, plan);
  if (result.quadratic_value < 0.0 && result.quadratic_value > -1e-12)
    result.quadratic_value = 0.0;
  double shannon = result.quadratic_value - eps0 * plan_entropy(plan);
  // First-order compensation of the residual marginal infeasibility: the plan
  // has Gibbs form in (f, g), so the objective gradient is 2 f_i + 2 g_j +
  // eps0 (1 - 2 log n) entrywise and the leading evaluation error is the inner
  // product of that with the marginal violations. Vanishes at feasibility.
  {
    const double inv_n = 1.0 / static_cast<double>(n);
    Vector delta_a = plan.rowwise().sum().array() - inv_n;
    Vector delta_b = plan.colwise().sum().transpose().array() - inv_n;
    double mass_defect = plan.sum() - 1.0;
    shannon -= 2.0 * coupling.f.dot(delta_a) + 2.0 * coupling.g.dot(delta_b) +
               eps0 * (1.0 - 2.0 * log_n) * mass_defect;
  }
  result.entropic_value = config.entropy_mode == EntropyMode::Shannon
                              ? shannon
                              : shannon - 2.0 * eps0 * log_n;
  result.plan = coupling;
  result.plan.plan = plan;
  result.converged = outer_converged && coupling.converged;
  return result;
}

inline GwResult gw_solve_entropic(const CostMatrix& cx, const CostMatrix& cy,
                                  const GwConfig& config,
                                  const GwWarmStart* warm = nullptr) {
  GwGeometry gx{cx, std::nullopt};
  GwGeometry gy{cy, std::nullopt};
  return gw_solve_entropic(gx, gy, config, warm);
}

constexpr int kBruteForceCap = 8;

struct BruteForceResult {
  double value = 0.0;
  std::vector<int> permutation;
};

/// Exact minimum of (1/n^2) sum_ij (cx_ij - cy_sigma(i)sigma(j))^2 over all
/// permutations sigma; ties resolved toward the lexicographically smallest
/// permutation. Exhaustive, capped at n <= cap.
inline BruteForceResult gw_brute_force(const Matrix& cx, const Matrix& cy,
                                       int cap = kBruteForceCap) {
  require(cx.rows() == cx.cols() && cy.rows() == cy.cols() && cx.rows() == cy.rows(),
          ErrorCode::DimensionMismatch, "brute force requires equal square matrices");
  const Eigen::Index n = cx.rows();
  require(n <= cap, ErrorCode::TooLarge,
          "brute force capped at n <= " + std::to_string(cap) + ", got n = " +
              std::to_string(n));

  std::vector<int> sigma(n);
  std::iota(sigma.begin(), sigma.end(), 0);
  BruteForceResult best;
  best.value = std::numeric_limits<double>::infinity();
  const double inv_n2 = 1.0 / static_cast<double>(n * n);
  do {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        double diff = cx(i, j) - cy(sigma[i], sigma[j]);
        total += diff * diff;
      }
    total *= inv_n2;
    if (total < best.value) {
      best.value = total;
      best.permutation = sigma;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return best;
}

inline BruteForceResult gw_brute_force(const CostMatrix& cx, const CostMatrix& cy,
                                       int cap = kBruteForceCap) {
  return gw_brute_force(cx.values, cy.values, cap);
}

}  // namespace gmg

#endif  // GMG_GW_HPP
