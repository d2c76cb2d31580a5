#include "confope/linalg.hpp"

#include <Eigen/SVD>

namespace confope {

namespace {

Eigen::JacobiSVD<Eigen::MatrixXd> thin_svd(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

}  // namespace

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rel_cutoff) {
  const auto svd = thin_svd(m);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? rel_cutoff * sv[0] : 0.0;
  Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff && sv[i] > 0.0) inv_sv[i] = 1.0 / sv[i];
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           double rel_cutoff) {
  const auto svd = thin_svd(a);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? rel_cutoff * sv[0] : 0.0;
  Eigen::VectorXd coeffs = svd.matrixU().transpose() * b;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    coeffs[i] = (sv[i] > cutoff && sv[i] > 0.0) ? coeffs[i] / sv[i] : 0.0;
  return svd.matrixV() * coeffs;
}

int numerical_rank(const Eigen::MatrixXd& m, double tol, bool relative) {
  const auto svd = Eigen::JacobiSVD<Eigen::MatrixXd>(m);
  const auto& sv = svd.singularValues();
  const double cutoff =
      relative ? (sv.size() > 0 ? tol * sv[0] : 0.0) : tol;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) ++r;
  return r;
}

}  // namespace confope
