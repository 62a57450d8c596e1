#pragma once

#include <Eigen/Core>

namespace canonnet {

struct EigenDecomposition {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column k pairs with values(k)
  int sweeps = 0;
};

inline constexpr double kDefaultJacobiTol = 1e-12;
inline constexpr int kDefaultJacobiSweeps = 64;
inline constexpr Eigen::Index kMaxJacobiDimension = 512;

/// Cyclic Jacobi eigensolver for dense symmetric matrices.
///
/// Iterates full sweeps of plane rotations until the off-diagonal Frobenius
/// norm drops below `tol * ||A||_F`. Throws InvalidArgument for non-square,
/// asymmetric (beyond 1e-10) or oversized input and NoConvergence when
/// `max_sweeps` is exhausted.
EigenDecomposition jacobi_eigensolve(const Eigen::MatrixXd& a,
                                     double tol = kDefaultJacobiTol,
                                     int max_sweeps = kDefaultJacobiSweeps);

}  // namespace canonnet
