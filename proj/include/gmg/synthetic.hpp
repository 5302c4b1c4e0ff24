#ifndef GMG_SYNTHETIC_HPP
#define GMG_SYNTHETIC_HPP

#include "gmg/common.hpp"
#include "gmg/point_cloud.hpp"
#include "gmg/rng.hpp"

#include <Eigen/Cholesky>

#include <utility>
#include <vector>

namespace gmg {

struct GaussianMixture {
  std::vector<double> weights;        // sum to 1
  Matrix means;                       // k x d
  std::vector<Matrix> covariances;    // k matrices, d x d, SPD
};

enum class TargetShape { UniformSquare, Circle };

struct SyntheticSpec {
  GaussianMixture source;
  TargetShape target_shape = TargetShape::UniformSquare;
  double square_lo = 0.0;
  double square_hi = 1.0;
  double circle_radius = 1.0;
  double circle_noise = 0.0;  // std of the radial perturbation
  int source_dim = 3;
  int target_dim = 2;
  int n_per_batch = 128;
  std::uint64_t seed = 1;
};

inline void validate(const SyntheticSpec& spec) {
  require(spec.source_dim >= 1 && spec.target_dim >= 1, ErrorCode::DimensionMismatch,
          "synthetic spec needs positive dimensions");
  double total = 0.0;
  for (double w : spec.source.weights) {
    require(w >= 0.0, ErrorCode::DimensionMismatch, "mixture weights must be nonnegative");
    total += w;
  }
  require(std::abs(total - 1.0) < 1e-9, ErrorCode::DimensionMismatch,
          "mixture weights must sum to 1");
  require(spec.source.means.rows() == static_cast<Eigen::Index>(spec.source.weights.size()),
          ErrorCode::DimensionMismatch, "one mean per mixture component");
  require(spec.source.means.cols() == spec.source_dim, ErrorCode::DimensionMismatch,
          "mixture means must live in source_dim");
  require(spec.source.covariances.size() == spec.source.weights.size(),
          ErrorCode::DimensionMismatch, "one covariance per mixture component");
  if (spec.target_shape == TargetShape::Circle)
    require(spec.target_dim == 2, ErrorCode::DimensionMismatch,
            "circle target requires target_dim = 2");
}

/// Three well-separated blobs in 3-D mapped to the unit square, the desk-scale
/// default for the training experiments.
inline SyntheticSpec default_synthetic_spec() {
  SyntheticSpec spec;
  spec.source.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  spec.source.means = Matrix{{1.2, 0.0, 0.4}, {-0.6, 1.0, -0.3}, {-0.5, -1.1, 0.2}};
  Matrix cov = 0.0625 * Matrix::Identity(3, 3);  // sigma = 0.25
  spec.source.covariances = {cov, cov, cov};
  return spec;
}

/// Draws n i.i.d. samples from each side; deterministic given the seed.
inline std::pair<PointCloud, PointCloud> sample_synthetic(const SyntheticSpec& spec,
                                                          int n, std::uint64_t seed) {
  validate(spec);
  require(n >= 1, ErrorCode::DimensionMismatch, "sample count must be positive");

  const int k = static_cast<int>(spec.source.weights.size());
  std::vector<Matrix> chol(k);
  for (int c = 0; c < k; ++c) {
    Eigen::LLT<Matrix> llt(spec.source.covariances[c]);
    require(llt.info() == Eigen::Success, ErrorCode::DimensionMismatch,
            "mixture covariance is not positive definite");
    chol[c] = llt.matrixL();
  }

  Rng source_rng(Rng::mix(seed, 0x736f7572u));  // distinct source/target streams
  Matrix source(n, spec.source_dim);
  for (int i = 0; i < n; ++i) {
    double u = source_rng.uniform();
    int component = k - 1;
    double cum = 0.0;
    for (int c = 0; c < k; ++c) {
      cum += spec.source.weights[c];
      if (u < cum) {
        component = c;
        break;
      }
    }
    Vector g = source_rng.normal_vector(spec.source_dim);
    source.row(i) =
        spec.source.means.row(component) + (chol[component] * g).transpose();
  }

  Rng target_rng(Rng::mix(seed, 0x74617267u));
  Matrix target(n, spec.target_dim);
  if (spec.target_shape == TargetShape::UniformSquare) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < spec.target_dim; ++j)
        target(i, j) = target_rng.uniform(spec.square_lo, spec.square_hi);
  } else {
    for (int i = 0; i < n; ++i) {
      double angle = 2.0 * M_PI * target_rng.uniform();
      double radius =
          spec.circle_radius * (1.0 + spec.circle_noise * target_rng.normal());
      target(i, 0) = radius * std::cos(angle);
      target(i, 1) = radius * std::sin(angle);
    }
  }
  return {PointCloud(std::move(source)), PointCloud(std::move(target))};
}

}  // namespace gmg

#endif  // GMG_SYNTHETIC_HPP
