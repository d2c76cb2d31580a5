#pragma once

#include <Eigen/Core>

namespace confope {

// Moore-Penrose pseudoinverse via SVD; singular values below
// rel_cutoff * sigma_max are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m,
                               double rel_cutoff = 1e-10);

// Minimum-norm least-squares solve A x = b through the same SVD cutoff.
Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           double rel_cutoff = 1e-10);

// Count of singular values above tol (absolute when relative=false,
// else tol * sigma_max).
int numerical_rank(const Eigen::MatrixXd& m, double tol, bool relative = true);

}  // namespace confope
