#include "itr/mvn.hpp"

#include <cmath>
#include <string>

namespace itr {

CholeskySpd chol_spd(const Mat& cov, const char* context) {
  if (cov.rows() != cov.cols()) {
    throw std::invalid_argument(std::string(context) + ": matrix not square");
  }
  const int n = static_cast<int>(cov.rows());
  if (n == 0) return CholeskySpd{Mat(0, 0), 0.0};
  Mat c = 0.5 * (cov + cov.transpose());
  const double mean_diag = c.diagonal().mean();
  for (double rel : {1e-9, 1e-6}) {
    Mat jittered = c;
    jittered.diagonal().array() += rel * mean_diag;
    Eigen::LLT<Mat> llt(jittered);
    if (llt.info() == Eigen::Success) {
      CholeskySpd out;
      out.lower = llt.matrixL();
      out.log_det = 2.0 * out.lower.diagonal().array().log().sum();
      if (std::isfinite(out.log_det)) return out;
    }
  }
  throw NumericalError(std::string(context) + ": covariance not positive definite after jitter");
}

double mvn_logpdf(const Vec& r, const CholeskySpd& chol) {
  const Vec z = chol.lower.triangularView<Eigen::Lower>().solve(r);
  return -0.5 * (r.size() * kLogTwoPi + chol.log_det + z.squaredNorm());
}

Vec mvn_sample(const Vec& mean, const CholeskySpd& chol, Rng& rng) {
  Vec z(mean.size());
  for (int j = 0; j < z.size(); ++j) z[j] = rng.normal();
  return mean + chol.lower * z;
}

Vec mvn_sample_psd(const Vec& mean, const Mat& cov, Rng& rng) {
  const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (cov + cov.transpose()));
  if (eig.info() != Eigen::Success) {
    throw NumericalError("mvn_sample_psd: eigendecomposition failed");
  }
  const Vec scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Vec z(mean.size());
  for (int j = 0; j < z.size(); ++j) z[j] = rng.normal() * scale[j];
  return mean + eig.eigenvectors() * z;
}

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + d * d / var);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

}  // namespace itr
