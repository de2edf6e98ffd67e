#pragma once

#include <Eigen/Dense>

#include "triadda/model.hpp"

namespace triadda {

// Sample statistics of an N x d ensemble (one particle per row).  The
// covariance uses divisor N, matching the empirical measure the statistical
// equations are written against.  m3 is the centered triple product
// E[(z1-m1)(z2-m2)(z3-m3)] of the first three modes; m3_raw keeps the
// uncentered average.
struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double m3 = 0.0;
  double m3_raw = 0.0;
  Eigen::VectorXd skew;
  Eigen::VectorXd kurt;
};

Moments empirical_moments(const RowMatrixXd& samples);

// Mean, covariance (divisor N) and centered M3 in one deterministic pass.
void basic_moments(const RowMatrixXd& samples, Eigen::VectorXd& mean,
                   Eigen::MatrixXd& cov, double& m3);

// E^N[z z^T] (uncentered second moment).
Eigen::MatrixXd second_moment(const RowMatrixXd& samples);

}  // namespace triadda
