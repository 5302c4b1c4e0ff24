#ifndef GMG_POINT_CLOUD_HPP
#define GMG_POINT_CLOUD_HPP

#include "gmg/common.hpp"

namespace gmg {

/// n points in d dimensions, rows are samples. Carries the uniform empirical
/// measure: every point has weight 1/n.
struct PointCloud {
  Matrix points;

  PointCloud() = default;
  explicit PointCloud(Matrix p) : points(std::move(p)) {}

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

inline void validate(const PointCloud& cloud) {
  require(cloud.size() >= 1 && cloud.dim() >= 1, ErrorCode::DimensionMismatch,
          "point cloud must have n >= 1 and d >= 1");
  require(all_finite(cloud.points), ErrorCode::NonFiniteCost,
          "point cloud contains non-finite entries");
}

}  // namespace gmg

#endif  // GMG_POINT_CLOUD_HPP
