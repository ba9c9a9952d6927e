#pragma once

#include <span>
#include <vector>

#include "itr/types.hpp"

namespace itr {

/// Derived constants of the double-sigmoid curve: b0 anchors g(0)=0 and
/// alpha0 makes the two branches meet at the switch point.
struct CurveConstants {
  double b0 = 0.0;
  double alpha0 = 0.0;
};

CurveConstants curve_constants(const ResponseParams& params);

/// Peak value g(gamma) = alpha1 (exp(alpha2 gamma / 2) - 1) / (exp(alpha2 gamma / 2) + 1).
double response_peak(const ResponseParams& params);

/// Curve value at elapsed time t >= 0 since administration.
double eval_response_curve(const ResponseParams& params, double t);

/// Sum of the per-event curves over all events strictly before t.
/// params_by_type is indexed by kind-1; a kind without parameters is an error.
double cumulative_response(std::span<const ResponseParams> params_by_type,
                           std::span<const TreatmentEvent> events, double t);

/// Vectorized cumulative response at several times.
Vec cumulative_response(std::span<const ResponseParams> params_by_type,
                        std::span<const TreatmentEvent> events, const Vec& times);

/// Fixed-effects mean x' beta.
double baseline_mean(const Vec& beta, const Vec& x);

/// b/g(gamma), the constrained ratio.
double response_ratio(const ResponseParams& params);

/// Builds ResponseParams from the raw parameter vector. A ratio b/g(gamma) at
/// or below kMinResponseRatio (including b = 0) is clamped to the boundary
/// value; a ratio >= 1 is a domain error.
ResponseParams make_response_from_raw(double alpha1, double alpha2, double alpha3,
                                      double gamma, double b);

/// Builds ResponseParams from the ratio parameterization; ratio must lie in (0,1).
ResponseParams make_response_from_ratio(double alpha1, double alpha2, double alpha3,
                                        double gamma, double ratio);

void validate_response(const ResponseParams& params);

inline constexpr double kMinResponseRatio = 1e-6;

}  // namespace itr
