#include "itr/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "itr/curves.hpp"
#include "itr/kernels.hpp"
#include "itr/mvn.hpp"
#include "itr/transforms.hpp"

namespace itr {

SimConfig SimConfig::defaults() {
  SimConfig c;
  c.beta_truth[0] = (Eigen::Vector3d() << 5.0, 5.0, 3.0).finished();
  c.beta_truth[1] = (Eigen::Vector3d() << 30.0, -5.0, -3.0).finished();
  c.beta_truth[2] = (Eigen::Vector3d() << 10.0, -2.0, -1.0).finished();
  c.resp_truth[0] = {make_response_from_raw(10.0, 0.9, 0.4, 10.0, 0.0),
                     make_response_from_raw(5.0, 0.9, 0.9, 5.0, 0.0),
                     make_response_from_raw(8.0, 0.7, 0.7, 15.0, 0.001)};
  c.resp_truth[1] = {make_response_from_raw(-10.0, 0.9, 0.7, 20.0, 0.0),
                     make_response_from_raw(-6.0, 0.5, 0.5, 15.0, 0.0),
                     make_response_from_raw(-8.0, 0.4, 0.3, 25.0, 0.0)};
  return c;
}

void SimConfig::validate() const {
  if (n_trajectories < 1) throw std::invalid_argument("SimConfig: n_trajectories < 1");
  if (!(duration_min_hours > 0.0) || !(duration_max_hours >= duration_min_hours)) {
    throw std::invalid_argument("SimConfig: bad duration range");
  }
  if (!(obs_gap_min > 0.0) || !(obs_gap_max >= obs_gap_min) || !(treat_gap_min > 0.0) ||
      !(treat_gap_max >= treat_gap_min)) {
    throw std::invalid_argument("SimConfig: bad gap range");
  }
  if (!(normal_high > normal_low)) throw std::invalid_argument("SimConfig: bad normal range");
  if (n_types != 2) throw std::invalid_argument("SimConfig: simulator generates 2 types");
  if (!(sigma_eps > 0.0) || !(sigma_eps_prime_sq > 0.0) ||
      !(rho_eps_prime > 0.0 && rho_eps_prime < 1.0)) {
    throw std::invalid_argument("SimConfig: bad noise truth");
  }
  if (!(covariate_time_unit_minutes > 0.0)) {
    throw std::invalid_argument("SimConfig: bad covariate time unit");
  }
}

int discretize_outcome(double y, double low, double high) {
  if (y < low) return 0;
  if (y <= high) return 1;
  return 2;
}

std::array<double, 3> policy_row(int prev_action, int level) {
  if (prev_action < 0 || prev_action > 2 || level < 0 || level > 2) {
    throw std::invalid_argument("policy_row: arguments must be in {0,1,2}");
  }
  // P(A_t | A_{t-1}, level), rows exactly as printed.
  static constexpr double table[3][3][3] = {
      // level 0 (below)        level 1 (inside)        level 2 (above)
      {{0.3, 0.5, 0.2}, {0.8, 0.1, 0.1}, {0.3, 0.2, 0.5}},  // prev 0
      {{0.3, 0.6, 0.1}, {0.8, 0.1, 0.1}, {0.6, 0.1, 0.3}},  // prev 1
      {{0.6, 0.3, 0.1}, {0.8, 0.1, 0.1}, {0.1, 0.1, 0.8}},  // prev 2
  };
  return {table[prev_action][level][0], table[prev_action][level][1],
          table[prev_action][level][2]};
}

int sample_policy_action(int prev_action, int level, Rng& rng) {
  const auto row = policy_row(prev_action, level);
  const double u = rng.uniform();
  if (u < row[0]) return 0;
  if (u < row[0] + row[1]) return 1;
  return 2;
}

namespace {

struct IndivTruthDraw {
  BaselineParams base;
  std::vector<ResponseParams> resp;
};

ResponseParams perturb_response(const ResponseParams& comp, double sd, Rng& rng) {
  // alpha1 and gamma move in raw space, the rest in transformed space.
  const double ratio = std::max(response_ratio(comp), kMinResponseRatio);
  for (;;) {
    const double a1 = rng.normal(comp.alpha1, sd);
    const double a2 = logit_inv(rng.normal(logit_fwd(comp.alpha2), sd));
    const double a3 = logit_inv(rng.normal(logit_fwd(comp.alpha3), sd));
    const double g = rng.normal(comp.gamma, sd);
    const double r = logit_inv(rng.normal(logit_fwd(ratio), sd));
    if (g > 0.0 && a1 != 0.0) return make_response_from_ratio(a1, a2, a3, g, r);
  }
}

}  // namespace

std::pair<Cohort, GroundTruth> simulate_cohort(const SimConfig& cfg) {
  cfg.validate();
  Cohort cohort;
  cohort.n_types = cfg.n_types;
  GroundTruth truth;
  cohort.trajectories.reserve(cfg.n_trajectories);
  truth.individuals.reserve(cfg.n_trajectories);

  for (int i = 0; i < cfg.n_trajectories; ++i) {
    // Per-trajectory stream: output is reproducible for a fixed seed
    // independently of generation order.
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(i));
    const double duration =
        60.0 * (cfg.duration_min_hours +
                rng.uniform() * (cfg.duration_max_hours - cfg.duration_min_hours));

    std::vector<double> obs_times{0.0};
    for (;;) {
      const double next = obs_times.back() + cfg.obs_gap_min +
                          rng.uniform() * (cfg.obs_gap_max - cfg.obs_gap_min);
      if (next > duration) break;
      obs_times.push_back(next);
    }
    std::vector<double> decision_times;
    for (double td = cfg.treat_gap_min + rng.uniform() * (cfg.treat_gap_max - cfg.treat_gap_min);
         td <= duration;
         td += cfg.treat_gap_min + rng.uniform() * (cfg.treat_gap_max - cfg.treat_gap_min)) {
      decision_times.push_back(td);
    }

    // Truth labels and individual parameters around the chosen components.
    GroundTruth::PerIndividual gt;
    gt.baseline_label = static_cast<int>(rng.uniform() * 3.0);
    gt.baseline.beta = cfg.beta_truth[gt.baseline_label];
    for (int j = 0; j < gt.baseline.beta.size(); ++j) {
      gt.baseline.beta[j] += rng.normal(0.0, cfg.baseline_spread_sd);
    }
    gt.baseline.sigma_u_sq =
        std::exp(rng.normal(std::log(cfg.sigma_u_sq_truth), cfg.baseline_spread_sd));
    gt.baseline.rho_u = logit_inv(
        rng.normal(logit_fwd(cfg.rho_u_truth[gt.baseline_label]), cfg.baseline_spread_sd));
    for (int d = 0; d < cfg.n_types; ++d) {
      const int label = static_cast<int>(rng.uniform() * 3.0);
      gt.response_label.push_back(label);
      gt.response.push_back(perturb_response(cfg.resp_truth[d][label], cfg.resp_spread_sd, rng));
    }

    // One consistent GP path over observation and decision times.
    std::vector<double> all_times(obs_times);
    all_times.insert(all_times.end(), decision_times.begin(), decision_times.end());
    std::sort(all_times.begin(), all_times.end());
    all_times.erase(std::unique(all_times.begin(), all_times.end()), all_times.end());
    Vec tall = Eigen::Map<const Vec>(all_times.data(), all_times.size());
    const Vec u_all =
        mvn_sample(Vec::Zero(tall.size()),
                   chol_spd(exp_kernel(gt.baseline.sigma_u_sq, gt.baseline.rho_u, tall),
                            "simulate K_u"),
                   rng);
    auto u_at = [&](double t) {
      const auto it = std::lower_bound(all_times.begin(), all_times.end(), t);
      return u_all[static_cast<int>(it - all_times.begin())];
    };
    const auto covariates_at = [&](double t) {
      Vec x(3);
      const double s = t / cfg.covariate_time_unit_minutes;
      x << 1.0, s, s * s;
      return x;
    };

    // Walk the decision times; the policy sees the discretized noise-free
    // latent outcome (fixed effects + GP + accumulated responses).
    std::vector<TreatmentEvent> events;
    int prev_action = 0;
    for (double td : decision_times) {
      const double latent = baseline_mean(gt.baseline.beta, covariates_at(td)) + u_at(td) +
                            cumulative_response(gt.response, events, td);
      const int level = discretize_outcome(latent, cfg.normal_low, cfg.normal_high);
      const int action = sample_policy_action(prev_action, level, rng);
      if (action > 0) events.push_back(TreatmentEvent{td, action});
      prev_action = action;
    }

    // Compose outcomes at observation times.
    const int j = static_cast<int>(obs_times.size());
    Trajectory traj;
    traj.id = "sim" + std::to_string(i);
    traj.times = Eigen::Map<const Vec>(obs_times.data(), j);
    traj.covariates.resize(j, 3);
    for (int m = 0; m < j; ++m) traj.covariates.row(m) = covariates_at(obs_times[m]);
    traj.treatments = events;

    Vec u_obs(j);
    for (int m = 0; m < j; ++m) u_obs[m] = u_at(obs_times[m]);
    gt.baseline_values = traj.covariates * gt.baseline.beta + u_obs;
    gt.response_values = cumulative_response(gt.response, events, traj.times);

    Vec eps(j);
    for (int m = 0; m < j; ++m) eps[m] = rng.normal(0.0, cfg.sigma_eps);
    Vec eps_prime = Vec::Zero(j);
    {
      const std::vector<double> s2(cfg.n_types, cfg.sigma_eps_prime_sq);
      const std::vector<double> rho(cfg.n_types, cfg.rho_eps_prime);
      const Mat k = treatment_noise_kernel(s2, rho, traj.times, events);
      std::vector<int> active;
      for (int m = 0; m < j; ++m) {
        if (k(m, m) > 0.0) active.push_back(m);
      }
      if (!active.empty()) {
        Mat sub(active.size(), active.size());
        for (size_t a = 0; a < active.size(); ++a) {
          for (size_t b = 0; b < active.size(); ++b) sub(a, b) = k(active[a], active[b]);
        }
        const Vec draw =
            mvn_sample(Vec::Zero(sub.rows()), chol_spd(sub, "simulate K_eps"), rng);
        for (size_t a = 0; a < active.size(); ++a) eps_prime[active[a]] = draw[a];
      }
    }
    traj.outcomes = gt.baseline_values + gt.response_values + eps + eps_prime;

    cohort.trajectories.push_back(std::move(traj));
    truth.individuals.push_back(std::move(gt));
  }
  cohort.validate();
  return {std::move(cohort), std::move(truth)};
}

}  // namespace itr
