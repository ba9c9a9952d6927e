#pragma once

#include <optional>
#include <string>
#include <vector>

#include "itr/sampler.hpp"
#include "itr/types.hpp"

namespace itr {

/// Forecast specification for one individual: fit on the first `cutoff`
/// observations, predict at `future_times` under the prescribed regime.
struct ForecastRequest {
  int cutoff = 1;
  Vec future_times;
  Mat future_covariates;                      // |future| x p
  std::vector<TreatmentEvent> future_events;  // events after the training end

  /// Held-out request: future times/covariates/events are the trajectory's
  /// own data after the cutoff.
  static ForecastRequest held_out(const Trajectory& traj, int cutoff);
  void validate(const Trajectory& traj) const;
};

struct Forecast {
  Vec mean;    // X_fut beta + f_fut + GP conditional mean
  Vec sample;  // one posterior-predictive draw
};

enum class Variant { kItr, kPop, kIndividual, kSubpop };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

/// Gaussian conditional forecast under one posterior draw: the residual of the
/// training block is conditioned on jointly over K_u + K_eps', iid noise on
/// the training diagonal, and the predictive sample adds the conditional
/// covariance draw plus future iid noise.
Forecast posterior_predict(const ParamState& draw, int i, const Trajectory& traj,
                           const ForecastRequest& req, const Hyperparams& h, Rng& rng);

struct RmseBucket {
  double lo_minutes = 0.0, hi_minutes = 0.0;  // horizon past the training end
  int n_obs = 0;
  double rmse = 0.0;    // RMSE of the per-individual mean prediction, averaged
  double ci_lo = 0.0;   // 2.5% quantile of per-draw RMSEs
  double ci_hi = 0.0;   // 97.5% quantile
};

struct RmseReport {
  std::vector<RmseBucket> buckets;
  RmseBucket overall;
};

/// Held-out RMSE protocol: per-individual prediction means over all retained
/// draws of all chains, per-bucket RMSE of those means averaged across
/// individuals, credible intervals from the per-draw RMSEs.
RmseReport evaluate_rmse(const std::vector<PosteriorTrace>& traces, const Cohort& cohort,
                         int cutoff, double bucket_width_minutes, const Hyperparams& h);

/// Maps a model variant onto hyperparameters so one sampler serves all four:
/// pop collapses to one component with point-mass spreads, individual pins one
/// component per individual, subpop keeps the truncation but collapses the
/// within-component spreads.
Hyperparams apply_variant(Variant v, const Hyperparams& h, int n_indiv);

struct CurveBand {
  Vec grid;
  Vec mean;
  Vec lo;  // 2.5%
  Vec hi;  // 97.5%
};

/// Pointwise posterior band of the response curve g_id over a time grid;
/// normalize divides by the individual's outcome at initiation of the first
/// type-d treatment (latest observation at or before it).
CurveBand extract_curves(const std::vector<PosteriorTrace>& traces, int i, int d,
                         const Vec& grid, bool normalize, const Cohort& cohort);

/// Linear-interpolation quantile of unsorted values.
double quantile(std::vector<double> values, double q);

/// Keeps the first `cutoff` observations (and the treatments up to the last
/// retained time) of every trajectory; used to build training cohorts.
Cohort truncate_cohort(const Cohort& cohort, int cutoff);

}  // namespace itr
