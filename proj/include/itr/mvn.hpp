#pragma once

#include "itr/rng.hpp"
#include "itr/types.hpp"

namespace itr {

/// Cholesky factor of a symmetric positive-definite matrix with the project's
/// jitter policy: 1e-9 * mean(diagonal) is added to the diagonal before
/// factorization; one retry at 1e-6 * mean(diagonal); otherwise NumericalError.
struct CholeskySpd {
  Mat lower;
  double log_det = 0.0;  // log det of the jittered matrix

  template <typename Derived>
  Mat solve(const Eigen::MatrixBase<Derived>& b) const {
    Mat y = lower.template triangularView<Eigen::Lower>().solve(b.derived().eval());
    return lower.transpose().template triangularView<Eigen::Upper>().solve(y);
  }
};

CholeskySpd chol_spd(const Mat& cov, const char* context = "chol_spd");

/// Log density of N(0, cov) at r, using a precomputed factorization.
double mvn_logpdf(const Vec& r, const CholeskySpd& chol);

/// Draw from N(mean, cov) given the factorization of cov.
Vec mvn_sample(const Vec& mean, const CholeskySpd& chol, Rng& rng);

/// Draw from N(mean, cov) for a merely positive-semidefinite covariance:
/// eigendecomposition with negative eigenvalues clamped to zero.
Vec mvn_sample_psd(const Vec& mean, const Mat& cov, Rng& rng);

inline constexpr double kLogTwoPi = 1.8378770664093454836;

/// Log density of a scalar normal.
double normal_logpdf(double x, double mean, double var);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace itr
