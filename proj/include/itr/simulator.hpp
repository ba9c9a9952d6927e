#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "itr/rng.hpp"
#include "itr/types.hpp"

namespace itr {

/// Synthetic-cohort configuration. Defaults reproduce the simulation study:
/// three-component ground-truth mixtures for the baseline and both treatment
/// types, a conditional treatment policy, and exponential-kernel noise.
struct SimConfig {
  int n_trajectories = 200;
  double duration_min_hours = 18.0, duration_max_hours = 24.0;
  double obs_gap_min = 5.0, obs_gap_max = 15.0;        // minutes
  double treat_gap_min = 60.0, treat_gap_max = 80.0;   // minutes
  double normal_low = 15.0, normal_high = 25.0;

  // Quadratic-drift covariates are (1, t, t^2) with t in units of this many
  // minutes; the default half-day keeps the truth baselines crossing the
  // normal range on the printed outcome scale.
  double covariate_time_unit_minutes = 720.0;

  int n_types = 2;
  std::array<Vec, 3> beta_truth;
  std::array<double, 3> rho_u_truth{0.1, 0.9, 0.5};
  double sigma_u_sq_truth = 0.01;
  std::array<std::array<ResponseParams, 3>, 2> resp_truth;  // [type][component]

  double sigma_eps = 0.3;            // iid noise sd
  double sigma_eps_prime_sq = 0.01;  // structured noise scale
  double rho_eps_prime = 0.9;

  double baseline_spread_sd = 0.1;  // transformed-space sd around components
  double resp_spread_sd = 0.3;

  std::uint64_t seed = 0;

  static SimConfig defaults();
  void validate() const;
};

/// Exact per-individual truth exported next to the cohort.
struct GroundTruth {
  struct PerIndividual {
    int baseline_label = 0;            // 0..2
    std::vector<int> response_label;   // per type, 0..2
    BaselineParams baseline;
    std::vector<ResponseParams> response;  // per type
    Vec baseline_values;  // X beta + u at observation times
    Vec response_values;  // f at observation times
  };
  std::vector<PerIndividual> individuals;
};

/// 0 below, 1 inside (inclusive), 2 above the normal range.
int discretize_outcome(double y, double low, double high);

/// One draw from the conditional policy table given the previous action and
/// the current outcome level; 0 = no treatment, 1/2 = treatment types.
int sample_policy_action(int prev_action, int level, Rng& rng);

/// Row of the policy table, P(action | prev, level).
std::array<double, 3> policy_row(int prev_action, int level);

std::pair<Cohort, GroundTruth> simulate_cohort(const SimConfig& cfg);

}  // namespace itr
