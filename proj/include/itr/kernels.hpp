#pragma once

#include <span>

#include "itr/types.hpp"

namespace itr {

/// Exponential covariance sigma^2 rho^{|t_j - t_j'|}.
Mat exp_kernel(double sigma_sq, double rho, const Vec& times);

/// Structured treatment-noise covariance K_eps' (without the iid diagonal):
/// entry (j,j') sums sigma_d^2 rho_d^{|t_j - t_j'|} over events l with
/// tau_l < t_j and tau_l < t_j'. window_minutes > 0 additionally zeroes terms
/// where either elapsed time exceeds the window.
Mat treatment_noise_kernel(std::span<const double> sigma_prime_sq,
                           std::span<const double> rho_prime, const Vec& times,
                           std::span<const TreatmentEvent> events,
                           double window_minutes = 0.0);

/// Full noise covariance sigma_eps_i^2 I + K_eps' for individual i.
Mat noise_covariance(const NoiseParams& noise, int i, const Vec& times,
                     std::span<const TreatmentEvent> events, double window_minutes = 0.0);

}  // namespace itr
