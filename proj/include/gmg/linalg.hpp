#ifndef GMG_LINALG_HPP
#define GMG_LINALG_HPP

#include "gmg/common.hpp"

#include <algorithm>
#include <vector>

namespace gmg {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sweeping the
/// upper triangle until the off-diagonal Frobenius norm falls below tol times
/// the matrix norm. Returns the eigenvalues in ascending order.
inline Vector jacobi_eigenvalues(Matrix a, double tol = 1e-10, int max_sweeps = 64) {
  require(a.rows() == a.cols(), ErrorCode::DimensionMismatch,
          "jacobi_eigenvalues needs a square matrix");
  const Eigen::Index n = a.rows();
  if (n == 1) return a.diagonal();

  const double norm_scale = std::max(1.0, a.norm());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * norm_scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          double akp = a(k, p);
          double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          double apk = a(p, k);
          double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }

  Vector values = a.diagonal();
  std::sort(values.data(), values.data() + n);
  return values;
}

}  // namespace gmg

#endif  // GMG_LINALG_HPP
