#include "itr/curves.hpp"

#include <cmath>
#include <limits>

namespace itr {

namespace {

// 1/(1+exp(-x)), stable for both signs of x.
double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_finite(const ResponseParams& p) {
  if (!std::isfinite(p.alpha1) || !std::isfinite(p.alpha2) || !std::isfinite(p.alpha3) ||
      !std::isfinite(p.gamma) || !std::isfinite(p.b)) {
    throw std::invalid_argument("ResponseParams: non-finite entry");
  }
}

}  // namespace

void validate_response(const ResponseParams& p) {
  check_finite(p);
  if (!(p.alpha2 > 0.0 && p.alpha2 < 1.0)) {
    throw std::invalid_argument("ResponseParams: alpha2 outside (0,1)");
  }
  if (!(p.alpha3 > 0.0 && p.alpha3 < 1.0)) {
    throw std::invalid_argument("ResponseParams: alpha3 outside (0,1)");
  }
  if (!(p.gamma > 0.0)) {
    throw std::invalid_argument("ResponseParams: gamma must be positive");
  }
  const double peak = response_peak(p);
  if (peak == 0.0) {
    // alpha1 = 0 degenerates to the flat curve; only b = 0 is consistent.
    if (p.b != 0.0) {
      throw std::invalid_argument("ResponseParams: b must be 0 when the peak is 0");
    }
    return;
  }
  const double ratio = p.b / peak;
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("ResponseParams: b/g(gamma) outside [0,1)");
  }
}

CurveConstants curve_constants(const ResponseParams& p) {
  validate_response(p);
  CurveConstants c;
  c.b0 = -p.alpha1 * sigmoid(-0.5 * p.alpha2 * p.gamma);
  c.alpha0 = (p.alpha1 + 2.0 * c.b0 - p.b) * (1.0 + std::exp(-0.5 * p.alpha3 * p.gamma));
  return c;
}

double response_peak(const ResponseParams& p) {
  // alpha1 (e^{x} - 1)/(e^{x} + 1) = alpha1 tanh(x/2), x = alpha2 gamma / 2.
  return p.alpha1 * std::tanh(0.25 * p.alpha2 * p.gamma);
}

double eval_response_curve(const ResponseParams& p, double t) {
  if (t < 0.0) {
    throw std::invalid_argument("eval_response_curve: negative elapsed time");
  }
  const CurveConstants c = curve_constants(p);
  if (t < p.gamma) {
    return c.b0 + p.alpha1 * sigmoid(p.alpha2 * (t - 0.5 * p.gamma));
  }
  return p.b + c.alpha0 * sigmoid(-p.alpha3 * (t - 1.5 * p.gamma));
}

double cumulative_response(std::span<const ResponseParams> params_by_type,
                           std::span<const TreatmentEvent> events, double t) {
  double total = 0.0;
  for (const auto& ev : events) {
    if (!(ev.time < t)) continue;
    const int d = ev.kind - 1;
    if (d < 0 || d >= static_cast<int>(params_by_type.size())) {
      throw std::invalid_argument("cumulative_response: event kind " +
                                  std::to_string(ev.kind) + " has no parameters");
    }
    total += eval_response_curve(params_by_type[d], t - ev.time);
  }
  return total;
}

Vec cumulative_response(std::span<const ResponseParams> params_by_type,
                        std::span<const TreatmentEvent> events, const Vec& times) {
  Vec out(times.size());
  for (int j = 0; j < times.size(); ++j) {
    out[j] = cumulative_response(params_by_type, events, times[j]);
  }
  return out;
}

double baseline_mean(const Vec& beta, const Vec& x) {
  if (beta.size() != x.size()) {
    throw std::invalid_argument("baseline_mean: dimension mismatch");
  }
  return beta.dot(x);
}

double response_ratio(const ResponseParams& p) {
  const double peak = response_peak(p);
  if (peak == 0.0) {
    throw std::invalid_argument("response_ratio: g(gamma) = 0");
  }
  return p.b / peak;
}

ResponseParams make_response_from_raw(double alpha1, double alpha2, double alpha3,
                                      double gamma, double b) {
  ResponseParams p{alpha1, alpha2, alpha3, gamma, b};
  check_finite(p);
  if (!(alpha2 > 0.0 && alpha2 < 1.0) || !(alpha3 > 0.0 && alpha3 < 1.0) || !(gamma > 0.0)) {
    throw std::invalid_argument("make_response_from_raw: parameter out of range");
  }
  const double peak = response_peak(p);
  if (peak == 0.0) {
    p.b = 0.0;
    return p;
  }
  const double ratio = b / peak;
  if (ratio >= 1.0) {
    throw std::invalid_argument("make_response_from_raw: b/g(gamma) >= 1");
  }
  // b = 0 sits on the boundary of the logit transform; clamp upward.
  p.b = ratio <= kMinResponseRatio ? kMinResponseRatio * peak : b;
  return p;
}

ResponseParams make_response_from_ratio(double alpha1, double alpha2, double alpha3,
                                        double gamma, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("make_response_from_ratio: ratio outside (0,1)");
  }
  ResponseParams p{alpha1, alpha2, alpha3, gamma, 0.0};
  check_finite(p);
  if (!(alpha2 > 0.0 && alpha2 < 1.0) || !(alpha3 > 0.0 && alpha3 < 1.0) || !(gamma > 0.0)) {
    throw std::invalid_argument("make_response_from_ratio: parameter out of range");
  }
  p.b = ratio * response_peak(p);
  return p;
}

void Trajectory::validate(int n_types) const {
  const auto j = times.size();
  if (j < 1) throw std::invalid_argument("Trajectory " + id + ": empty");
  if (outcomes.size() != j || covariates.rows() != j) {
    throw std::invalid_argument("Trajectory " + id + ": length mismatch");
  }
  if (covariates.cols() < 1) {
    throw std::invalid_argument("Trajectory " + id + ": no covariates");
  }
  for (int k = 1; k < j; ++k) {
    if (!(times[k] > times[k - 1])) {
      throw std::invalid_argument("Trajectory " + id + ": times not strictly increasing");
    }
  }
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& ev : treatments) {
    if (ev.kind < 1 || ev.kind > n_types) {
      throw std::invalid_argument("Trajectory " + id + ": treatment kind out of range");
    }
    if (ev.time < prev) {
      throw std::invalid_argument("Trajectory " + id + ": treatments not sorted");
    }
    prev = ev.time;
  }
}

void Cohort::validate() const {
  if (trajectories.empty()) throw std::invalid_argument("Cohort: empty");
  const auto p = trajectories.front().n_cov();
  for (const auto& t : trajectories) {
    t.validate(n_types);
    if (t.n_cov() != p) {
      throw std::invalid_argument("Cohort: covariate dimension differs across trajectories");
    }
  }
}

void BaselineParams::validate() const {
  if (!(sigma_u_sq > 0.0) || !std::isfinite(sigma_u_sq)) {
    throw std::invalid_argument("BaselineParams: sigma_u_sq must be positive");
  }
  if (!(rho_u > 0.0 && rho_u < 1.0)) {
    throw std::invalid_argument("BaselineParams: rho_u outside (0,1)");
  }
  if (beta.size() == 0 || !beta.allFinite()) {
    throw std::invalid_argument("BaselineParams: invalid beta");
  }
}

void NoiseParams::validate() const {
  for (double v : sigma_eps_sq) {
    if (!(v > 0.0)) throw std::invalid_argument("NoiseParams: sigma_eps_sq must be positive");
  }
  for (double v : sigma_eps_prime_sq) {
    if (!(v > 0.0)) throw std::invalid_argument("NoiseParams: sigma_eps_prime_sq must be positive");
  }
  for (double v : rho_eps_prime) {
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("NoiseParams: rho_eps_prime outside (0,1)");
  }
}

}  // namespace itr
