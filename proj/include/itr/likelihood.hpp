#pragma once

#include <span>

#include "itr/types.hpp"

namespace itr {

/// Multivariate-normal log density of the outcomes Y_i with mean
/// X_i beta + u + f_i and covariance sigma_eps_i^2 I + K_eps'.
double outcome_loglik(const Trajectory& traj, const BaselineParams& base,
                      const RandomEffect& u, std::span<const ResponseParams> resp,
                      const NoiseParams& noise, int i, double noise_window_minutes = 0.0);

}  // namespace itr
