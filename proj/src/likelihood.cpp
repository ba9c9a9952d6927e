#include "itr/likelihood.hpp"

#include "itr/curves.hpp"
#include "itr/kernels.hpp"
#include "itr/mvn.hpp"

namespace itr {

double outcome_loglik(const Trajectory& traj, const BaselineParams& base,
                      const RandomEffect& u, std::span<const ResponseParams> resp,
                      const NoiseParams& noise, int i, double noise_window_minutes) {
  base.validate();
  if (base.beta.size() != traj.covariates.cols()) {
    throw std::invalid_argument("outcome_loglik: beta dimension mismatch");
  }
  if (u.u.size() != traj.times.size()) {
    throw std::invalid_argument("outcome_loglik: random effect length mismatch");
  }
  const Vec f = cumulative_response(resp, traj.treatments, traj.times);
  const Vec r = traj.outcomes - traj.covariates * base.beta - u.u - f;
  const Mat cov =
      noise_covariance(noise, i, traj.times, traj.treatments, noise_window_minutes);
  return mvn_logpdf(r, chol_spd(cov, "outcome_loglik"));
}

}  // namespace itr
