#include "itr/transforms.hpp"

#include <cmath>

#include "itr/curves.hpp"

namespace itr {

double logit_fwd(double x) {
  if (!(x > 0.0 && x < 1.0)) {
    throw std::invalid_argument("logit_fwd: argument outside (0,1)");
  }
  return std::log(x) - std::log1p(-x);
}

double logit_inv(double y) {
  if (!std::isfinite(y)) throw std::invalid_argument("logit_inv: non-finite argument");
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

double log_fwd(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("log_fwd: argument must be positive");
  return std::log(x);
}

double log_inv(double y) {
  if (!std::isfinite(y)) throw std::invalid_argument("log_inv: non-finite argument");
  return std::exp(y);
}

double log_jacobian_logit(double x) {
  if (!(x > 0.0 && x < 1.0)) {
    throw std::invalid_argument("log_jacobian_logit: argument outside (0,1)");
  }
  return -std::log(x) - std::log1p(-x);
}

double log_jacobian_log(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("log_jacobian_log: argument must be positive");
  return -std::log(x);
}

UnconstrainedResponse response_to_unconstrained(const ResponseParams& p) {
  validate_response(p);
  const double ratio = response_ratio(p);  // throws when g(gamma) = 0
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("response_to_unconstrained: b/g(gamma) outside (0,1)");
  }
  UnconstrainedResponse u;
  u.v << p.alpha1, logit_fwd(p.alpha2), logit_fwd(p.alpha3), p.gamma, logit_fwd(ratio);
  return u;
}

ResponseParams response_from_unconstrained(const UnconstrainedResponse& u) {
  if (!u.v.allFinite()) {
    throw std::invalid_argument("response_from_unconstrained: non-finite entry");
  }
  if (!(u.v[3] > 0.0)) {
    throw std::invalid_argument("response_from_unconstrained: gamma must be positive");
  }
  return make_response_from_ratio(u.v[0], logit_inv(u.v[1]), logit_inv(u.v[2]), u.v[3],
                                  logit_inv(u.v[4]));
}

double log_jacobian_response(const ResponseParams& p) {
  validate_response(p);
  const double peak = response_peak(p);
  if (peak == 0.0 || p.b == 0.0 || p.b == peak) {
    throw std::invalid_argument("log_jacobian_response: degenerate b or g(gamma)");
  }
  // |zeta| = |g| / (|b| |g - b|); the 5x5 Jacobian is triangular so the
  // remaining factors are the two logit diagonals.
  const double log_abs_zeta =
      std::log(std::abs(peak)) - std::log(std::abs(p.b)) - std::log(std::abs(peak - p.b));
  return log_abs_zeta - std::log(p.alpha2) - std::log1p(-p.alpha2) - std::log(p.alpha3) -
         std::log1p(-p.alpha3);
}

}  // namespace itr
