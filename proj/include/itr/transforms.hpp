#pragma once

#include "itr/types.hpp"

namespace itr {

/// log(x/(1-x)); domain (0,1).
double logit_fwd(double x);
/// Inverse logit; maps R onto (0,1).
double logit_inv(double y);
/// log(x); domain (0, inf).
double log_fwd(double x);
double log_inv(double y);

/// log |d logit(x)/dx| = log(1/(x(1-x))).
double log_jacobian_logit(double x);
/// log |d log(x)/dx| = log(1/x).
double log_jacobian_log(double x);

/// Response parameters mapped to real space:
/// (alpha1, logit(alpha2), logit(alpha3), gamma, logit(b/g(gamma))).
struct UnconstrainedResponse {
  Vec5 v = Vec5::Zero();
};

UnconstrainedResponse response_to_unconstrained(const ResponseParams& params);
ResponseParams response_from_unconstrained(const UnconstrainedResponse& u);

/// Log absolute determinant of the Jacobian of response_to_unconstrained:
/// log|zeta| - log alpha2 - log(1-alpha2) - log alpha3 - log(1-alpha3)
/// with zeta = g(gamma) / (b (g(gamma) - b)).
double log_jacobian_response(const ResponseParams& params);

}  // namespace itr
