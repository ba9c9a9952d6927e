#include "itr/sampler.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <thread>

#include "itr/curves.hpp"
#include "itr/kernels.hpp"
#include "itr/transforms.hpp"

namespace itr {

void SamplerConfig::validate() const {
  if (iterations < 1 || burn_in < 0 || burn_in >= iterations) {
    throw std::invalid_argument("SamplerConfig: need 0 <= burn_in < iterations");
  }
  if (thin < 1) throw std::invalid_argument("SamplerConfig: thin must be >= 1");
  if (chains < 1) throw std::invalid_argument("SamplerConfig: chains must be >= 1");
  if (!(scale_real > 0.0) || !(scale_unit > 0.0)) {
    throw std::invalid_argument("SamplerConfig: proposal scales must be positive");
  }
  if (fixed_gp_scale < 0.0) {
    throw std::invalid_argument("SamplerConfig: fixed_gp_scale must be >= 0");
  }
}

std::pair<double, double> scalar_mean_posterior(double base_mean, double base_var,
                                                double within_var,
                                                std::span<const double> obs) {
  const double n = static_cast<double>(obs.size());
  double sum = 0.0;
  for (double v : obs) sum += v;
  const double denom = within_var + n * base_var;
  return {(within_var * base_mean + base_var * sum) / denom,
          within_var * base_var / denom};
}

std::pair<Vec5, Vec5> response_mean_posterior(const Vec5& base_mean, const Vec5& base_var,
                                              const Vec5& within_var,
                                              std::span<const Vec5> members) {
  Vec5 sum = Vec5::Zero();
  for (const Vec5& t : members) sum += t;
  const double n = static_cast<double>(members.size());
  Vec5 mean, var;
  for (int m = 0; m < 5; ++m) {
    const double prec = 1.0 / base_var[m] + n / within_var[m];
    var[m] = 1.0 / prec;
    mean[m] = var[m] * (base_mean[m] / base_var[m] + sum[m] / within_var[m]);
  }
  return {mean, var};
}

GaussianConditional beta_conditional(const Mat& x, const Vec& resid, double sigma_eps_sq,
                                     const Vec& beta_star, const Mat& sigma_star) {
  const int p = static_cast<int>(x.cols());
  const Mat sigma_star_inv = chol_spd(sigma_star, "beta_conditional Sigma*").solve(
      Mat::Identity(p, p));
  const Mat prec = sigma_star_inv + x.transpose() * x / sigma_eps_sq;
  GaussianConditional out;
  out.cov = chol_spd(prec, "beta_conditional precision").solve(Mat::Identity(p, p));
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.mean = out.cov * (x.transpose() * resid / sigma_eps_sq + sigma_star_inv * beta_star);
  return out;
}

GaussianConditional gp_conditional_zero_mean(const Mat& k, const Vec& resid,
                                             double sigma_eps_sq) {
  // mean = k (k + s2 I)^{-1} r and cov = k - k (k + s2 I)^{-1} k, computed
  // through one triangular solve V = L^{-1} k and a rank update.
  Mat a = k;
  a.diagonal().array() += sigma_eps_sq;
  const CholeskySpd chol = chol_spd(a, "gp_conditional");
  const Mat v = chol.lower.triangularView<Eigen::Lower>().solve(k);
  GaussianConditional out;
  out.mean = v.transpose() * chol.lower.triangularView<Eigen::Lower>().solve(resid);
  out.cov = k;
  out.cov.selfadjointView<Eigen::Lower>().rankUpdate(v.transpose(), -1.0);
  out.cov.triangularView<Eigen::StrictlyUpper>() =
      out.cov.transpose().triangularView<Eigen::StrictlyUpper>();
  return out;
}

GaussianConditional smoothed_response_conditional(const Mat& k_eps, const Vec& f,
                                                  const Vec& resid, double sigma_eps_sq) {
  const int n = static_cast<int>(f.size());
  std::vector<int> active;
  for (int j = 0; j < n; ++j) {
    if (k_eps(j, j) > 0.0) active.push_back(j);
  }
  GaussianConditional out;
  out.mean = f;
  out.cov = Mat::Zero(n, n);
  if (active.empty()) return out;
  const int m = static_cast<int>(active.size());
  Mat ka(m, m);
  Vec ra(m);
  for (int a = 0; a < m; ++a) {
    ra[a] = resid[active[a]] - f[active[a]];
    for (int b = 0; b < m; ++b) ka(a, b) = k_eps(active[a], active[b]);
  }
  const GaussianConditional sub = gp_conditional_zero_mean(ka, ra, sigma_eps_sq);
  for (int a = 0; a < m; ++a) {
    out.mean[active[a]] = f[active[a]] + sub.mean[a];
    for (int b = 0; b < m; ++b) out.cov(active[a], active[b]) = sub.cov(a, b);
  }
  return out;
}

std::pair<double, double> sigma_eps_posterior(double s_eps, double nu_eps,
                                              const Vec& resid_e) {
  return {s_eps + 0.5 * resid_e.size(), nu_eps + 0.5 * resid_e.squaredNorm()};
}

std::pair<double, double> concentration_gamma_mixture(double c, double d, int n_clusters,
                                                      int n_units, double eta) {
  const double rate = d - std::log(eta);
  const double a = c + n_clusters - 1.0;
  return {a / (a + n_units * rate), rate};
}

namespace {

Vec beta_sticks(int k, double m, Rng& rng) {
  Vec v(k);
  for (int j = 0; j + 1 < k; ++j) v[j] = rng.beta(1.0, m);
  v[k - 1] = 1.0;
  return v;
}

}  // namespace

GibbsSampler::GibbsSampler(const Cohort& cohort, const Hyperparams& h,
                           const SamplerConfig& cfg, int chain_index)
    : h_(h), cfg_(cfg), chain_index_(chain_index),
      rng_(Rng::stream(cfg.seed, static_cast<std::uint64_t>(chain_index))) {
  cohort.validate();
  h_.validate();
  cfg_.validate();
  if (h_.p != cohort.trajectories.front().n_cov()) {
    throw std::invalid_argument("GibbsSampler: hyperparameter p does not match cohort");
  }
  if (cohort.n_types > h_.n_types) {
    throw std::invalid_argument("GibbsSampler: cohort has more treatment types than hyperparams");
  }
  if (h_.pin_assignments) {
    const int n = cohort.n_indiv();
    if (h_.k1 != n) throw std::invalid_argument("GibbsSampler: pinned assignments need k1 == I");
    for (int v : h_.k2) {
      if (v != n) throw std::invalid_argument("GibbsSampler: pinned assignments need k2 == I");
    }
  }
  data_.reserve(cohort.trajectories.size());
  for (const auto& traj : cohort.trajectories) {
    IndivData d;
    d.id = traj.id;
    d.t = traj.times;
    d.y = traj.outcomes;
    d.x = traj.covariates;
    d.events = traj.treatments;
    d.events_by_type.resize(h_.n_types);
    for (const auto& ev : d.events) d.events_by_type[ev.kind - 1].push_back(ev);
    for (int j = 0; j < d.t.size(); ++j) {
      for (const auto& ev : d.events) {
        if (ev.time < d.t[j]) {
          d.active.push_back(j);
          break;
        }
      }
    }
    const int j = static_cast<int>(d.t.size());
    d.dt_abs.resize(j, j);
    for (int a = 0; a < j; ++a) {
      for (int b = 0; b < j; ++b) d.dt_abs(a, b) = std::abs(d.t[a] - d.t[b]);
    }
    d.pair_count.assign(h_.n_types, Mat::Zero(j, j));
    const double w = h_.noise_window_minutes;
    for (const auto& ev : d.events) {
      Mat& count = d.pair_count[ev.kind - 1];
      for (int a = 0; a < j; ++a) {
        const double ea = d.t[a] - ev.time;
        if (!(ea > 0.0) || (w > 0.0 && ea > w)) continue;
        for (int b = 0; b < j; ++b) {
          const double eb = d.t[b] - ev.time;
          if (!(eb > 0.0) || (w > 0.0 && eb > w)) continue;
          count(a, b) += 1.0;
        }
      }
    }
    data_.push_back(std::move(d));
  }
}

Mat GibbsSampler::ku(int i, double sigma_sq, double rho) const {
  if (!(sigma_sq > 0.0) || !(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("ku: parameter out of range");
  }
  return sigma_sq * (std::log(rho) * data_[i].dt_abs.array()).exp().matrix();
}

Mat GibbsSampler::keps(int i, std::span<const double> sigma_prime_sq,
                       std::span<const double> rho_prime) const {
  const auto& d = data_[i];
  const int j = static_cast<int>(d.t.size());
  Mat k = Mat::Zero(j, j);
  for (int dt = 0; dt < h_.n_types; ++dt) {
    if (d.events_by_type[dt].empty()) continue;
    k.array() += sigma_prime_sq[dt] * d.pair_count[dt].array() *
                 (std::log(rho_prime[dt]) * d.dt_abs.array()).exp();
  }
  return k;
}

void GibbsSampler::rebuild_response_cache(int i) {
  const auto& d = data_[i];
  f_by_type_[i].resize(h_.n_types);
  f_total_[i] = Vec::Zero(d.t.size());
  for (int dt = 0; dt < h_.n_types; ++dt) {
    f_by_type_[i][dt] =
        cumulative_response(std::span<const ResponseParams>(state_.response[i]),
                            d.events_by_type[dt], d.t);
    f_total_[i] += f_by_type_[i][dt];
  }
}

void GibbsSampler::init_from_prior() {
  current_block_ = "init";
  const int n = n_indiv();
  state_ = ParamState{};
  state_.baseline.resize(n);
  state_.random_effects.resize(n);
  state_.response.assign(n, std::vector<ResponseParams>(h_.n_types));
  state_.noise.sigma_eps_sq.resize(n);
  state_.noise.sigma_eps_prime_sq.resize(h_.n_types);
  state_.noise.rho_eps_prime.resize(h_.n_types);
  f_total_.assign(n, Vec());
  f_by_type_.assign(n, {});
  accept_ = AcceptStats{};
  accept_.response.resize(h_.n_types);

  // Baseline mixture.
  state_.base_mix.concentration = rng_.gamma(h_.c1, 1.0 / h_.d1);
  state_.base_mix.sticks = beta_sticks(h_.k1, state_.base_mix.concentration, rng_);
  state_.base_mix.weights = stick_weights(state_.base_mix.sticks);
  state_.base_comps.clear();
  for (int k = 0; k < h_.k1; ++k) state_.base_comps.push_back(sample_base_baseline(h_, rng_));
  state_.base_mix.assignments.resize(n);
  for (int i = 0; i < n; ++i) {
    state_.base_mix.assignments[i] =
        h_.pin_assignments ? i
                           : rng_.categorical_from_log(state_.base_mix.weights.array().log());
  }

  // Response mixtures.
  state_.resp_mix.resize(h_.n_types);
  state_.resp_comps.resize(h_.n_types);
  for (int d = 0; d < h_.n_types; ++d) {
    auto& mix = state_.resp_mix[d];
    mix.concentration = rng_.gamma(h_.c2[d], 1.0 / h_.d2[d]);
    mix.sticks = beta_sticks(h_.k2[d], mix.concentration, rng_);
    mix.weights = stick_weights(mix.sticks);
    state_.resp_comps[d].clear();
    for (int k = 0; k < h_.k2[d]; ++k) {
      state_.resp_comps[d].push_back(sample_base_response(h_, d, rng_));
    }
    mix.assignments.resize(n);
    for (int i = 0; i < n; ++i) {
      mix.assignments[i] =
          h_.pin_assignments ? i : rng_.categorical_from_log(mix.weights.array().log());
    }
  }

  // Individual parameters given their components.
  for (int i = 0; i < n; ++i) {
    const auto& comp = state_.base_comps[state_.base_mix.assignments[i]];
    auto& base = state_.baseline[i];
    Vec z(h_.p);
    for (int j = 0; j < h_.p; ++j) z[j] = rng_.normal();
    base.beta = comp.beta_star + chol_spd(comp.sigma_star, "init Sigma*").lower * z;
    base.sigma_u_sq =
        cfg_.fixed_gp_scale > 0.0
            ? cfg_.fixed_gp_scale
            : std::exp(rng_.normal(comp.mu_sigma_u_star, std::sqrt(h_.var_sigma_u_within)));
    base.rho_u = logit_inv(rng_.normal(comp.mu_rho_u_star, std::sqrt(h_.var_rho_u_within)));
    state_.random_effects[i].u =
        mvn_sample(Vec::Zero(data_[i].t.size()),
                   chol_spd(ku(i, base.sigma_u_sq, base.rho_u), "init K_u"), rng_);
    state_.noise.sigma_eps_sq[i] = rng_.inverse_gamma(h_.s_eps, h_.nu_eps);
    for (int d = 0; d < h_.n_types; ++d) {
      const Vec5& mu = state_.resp_comps[d][state_.resp_mix[d].assignments[i]].mu_star;
      UnconstrainedResponse t;
      do {
        for (int m = 0; m < 5; ++m) {
          t.v[m] = rng_.normal(mu[m], std::sqrt(h_.var_resp_within[m]));
        }
      } while (!(t.v[3] > 0.0));  // gamma must stay positive
      state_.response[i][d] = response_from_unconstrained(t);
    }
    rebuild_response_cache(i);
  }
  for (int d = 0; d < h_.n_types; ++d) {
    state_.noise.sigma_eps_prime_sq[d] =
        std::exp(rng_.normal(h_.mu_eps1, std::sqrt(h_.var_eps1)));
    state_.noise.rho_eps_prime[d] = logit_inv(rng_.normal(h_.mu_eps2, std::sqrt(h_.var_eps2)));
  }
  iteration_ = 0;
}

void GibbsSampler::update_baseline_components() {
  update_baseline_locations();
  if (h_.pin_assignments) return;
  update_baseline_sticks();
  update_baseline_assignments();
}

void GibbsSampler::update_baseline_locations() {
  current_block_ = "baseline component locations (steps 1-3)";
  const int n = n_indiv();
  const int k1 = h_.k1;
  auto& mix = state_.base_mix;

  // Step 1: NIW posteriors per component.
  std::vector<std::vector<Vec>> members(k1);
  for (int i = 0; i < n; ++i) members[mix.assignments[i]].push_back(state_.baseline[i].beta);
  const NiwParams prior{h_.beta0, h_.kappa0, h_.nu0, h_.s0};
  for (int k = 0; k < k1; ++k) {
    const NiwParams post = niw_posterior(prior, members[k]);
    auto& comp = state_.base_comps[k];
    if (h_.sigma_star_fixed > 0.0) {
      comp.sigma_star = h_.sigma_star_fixed * Mat::Identity(h_.p, h_.p);
      Vec z(h_.p);
      for (int j = 0; j < h_.p; ++j) z[j] = rng_.normal();
      comp.beta_star = post.mean + chol_spd(comp.sigma_star / post.kappa, "step1").lower * z;
    } else {
      auto [beta, sigma] = sample_niw(post, rng_);
      comp.beta_star = std::move(beta);
      comp.sigma_star = std::move(sigma);
    }
  }

  // Steps 2-3: Gaussian posteriors of the transformed-GP component means.
  for (int k = 0; k < k1; ++k) {
    std::vector<double> log_s2, logit_rho;
    for (int i = 0; i < n; ++i) {
      if (mix.assignments[i] != k) continue;
      log_s2.push_back(std::log(state_.baseline[i].sigma_u_sq));
      logit_rho.push_back(logit_fwd(state_.baseline[i].rho_u));
    }
    auto [ms, vs] = scalar_mean_posterior(h_.mu_sigma_u_base, h_.var_sigma_u_base,
                                          h_.var_sigma_u_within, log_s2);
    state_.base_comps[k].mu_sigma_u_star = rng_.normal(ms, std::sqrt(vs));
    auto [mr, vr] = scalar_mean_posterior(h_.mu_rho_u_base, h_.var_rho_u_base,
                                          h_.var_rho_u_within, logit_rho);
    state_.base_comps[k].mu_rho_u_star = rng_.normal(mr, std::sqrt(vr));
  }
}

void GibbsSampler::update_baseline_sticks() {
  current_block_ = "baseline sticks (step 4)";
  const int n = n_indiv();
  const int k1 = h_.k1;
  auto& mix = state_.base_mix;
  std::vector<int> counts(k1, 0);
  for (int i = 0; i < n; ++i) counts[mix.assignments[i]]++;
  std::vector<int> tail(k1 + 1, 0);
  for (int k = k1 - 1; k >= 0; --k) tail[k] = tail[k + 1] + counts[k];
  for (int k = 0; k + 1 < k1; ++k) {
    mix.sticks[k] = rng_.beta(1.0 + counts[k], mix.concentration + tail[k + 1]);
  }
  mix.sticks[k1 - 1] = 1.0;
  mix.weights = stick_weights(mix.sticks);
}

void GibbsSampler::update_baseline_assignments() {
  current_block_ = "baseline assignments (step 5)";
  const int k1 = h_.k1;
  auto& mix = state_.base_mix;
  // The Jacobian factors of the transformed parameters are constant across k
  // and cancel in the normalization.
  std::vector<CholeskySpd> chols;
  chols.reserve(k1);
  for (int k = 0; k < k1; ++k) {
    chols.push_back(chol_spd(state_.base_comps[k].sigma_star, "step 5 Sigma*"));
  }
  const Vec log_w = mix.weights.array().log();
  for (int i = 0; i < n_indiv(); ++i) {
    const auto& base = state_.baseline[i];
    const double log_s2 = std::log(base.sigma_u_sq);
    const double logit_rho = logit_fwd(base.rho_u);
    Vec lp(k1);
    for (int k = 0; k < k1; ++k) {
      const auto& comp = state_.base_comps[k];
      lp[k] = log_w[k] + mvn_logpdf(base.beta - comp.beta_star, chols[k]) +
              normal_logpdf(log_s2, comp.mu_sigma_u_star, h_.var_sigma_u_within) +
              normal_logpdf(logit_rho, comp.mu_rho_u_star, h_.var_rho_u_within);
    }
    mix.assignments[i] = rng_.categorical_from_log(lp);
  }
}

void GibbsSampler::update_response_components(int d) {
  update_response_locations(d);
  if (h_.pin_assignments) return;
  update_response_sticks(d);
  update_response_assignments(d);
}

void GibbsSampler::update_response_locations(int d) {
  current_block_ = "response component locations (step 6), type " + std::to_string(d + 1);
  const int k2 = h_.k2[d];
  auto& mix = state_.resp_mix[d];
  std::vector<std::vector<Vec5>> members(k2);
  for (int i = 0; i < n_indiv(); ++i) {
    members[mix.assignments[i]].push_back(
        response_to_unconstrained(state_.response[i][d]).v);
  }
  for (int k = 0; k < k2; ++k) {
    auto [mean, var] = response_mean_posterior(h_.mu_resp_base[d], h_.var_resp_base[d],
                                               h_.var_resp_within, members[k]);
    for (int m = 0; m < 5; ++m) {
      state_.resp_comps[d][k].mu_star[m] = rng_.normal(mean[m], std::sqrt(var[m]));
    }
  }
}

void GibbsSampler::update_response_sticks(int d) {
  current_block_ = "response sticks (step 7), type " + std::to_string(d + 1);
  const int n = n_indiv();
  const int k2 = h_.k2[d];
  auto& mix = state_.resp_mix[d];
  std::vector<int> counts(k2, 0);
  for (int i = 0; i < n; ++i) counts[mix.assignments[i]]++;
  std::vector<int> tail(k2 + 1, 0);
  for (int k = k2 - 1; k >= 0; --k) tail[k] = tail[k + 1] + counts[k];
  for (int k = 0; k + 1 < k2; ++k) {
    mix.sticks[k] = rng_.beta(1.0 + counts[k], mix.concentration + tail[k + 1]);
  }
  mix.sticks[k2 - 1] = 1.0;
  mix.weights = stick_weights(mix.sticks);
}

void GibbsSampler::update_response_assignments(int d) {
  current_block_ = "response assignments (step 8), type " + std::to_string(d + 1);
  const int k2 = h_.k2[d];
  auto& mix = state_.resp_mix[d];
  // Response Jacobian is constant across k.
  const Vec log_w = mix.weights.array().log();
  for (int i = 0; i < n_indiv(); ++i) {
    const Vec5 t = response_to_unconstrained(state_.response[i][d]).v;
    Vec lp(k2);
    for (int k = 0; k < k2; ++k) {
      double v = log_w[k];
      for (int m = 0; m < 5; ++m) {
        v += normal_logpdf(t[m], state_.resp_comps[d][k].mu_star[m], h_.var_resp_within[m]);
      }
      lp[k] = v;
    }
    mix.assignments[i] = rng_.categorical_from_log(lp);
  }
}

void GibbsSampler::update_individual_regression(int i) {
  current_block_ = "individual regression (steps 9-11), individual " + std::to_string(i);
  const auto& d = data_[i];
  auto& base = state_.baseline[i];
  auto& u = state_.random_effects[i].u;
  const Vec& f = f_total_[i];
  const double s2_eps = state_.noise.sigma_eps_sq[i];
  const int zi = state_.base_mix.assignments[i];

  // Step 9: beta_i.
  {
    const auto& comp = state_.base_comps[zi];
    const GaussianConditional cond =
        beta_conditional(d.x, d.y - u - f, s2_eps, comp.beta_star, comp.sigma_star);
    base.beta = mvn_sample(cond.mean, chol_spd(cond.cov, "step 9 cov"), rng_);
  }

  // Step 10: random effect.
  {
    const GaussianConditional cond = gp_conditional_zero_mean(
        ku(i, base.sigma_u_sq, base.rho_u), d.y - d.x * base.beta - f, s2_eps);
    u = mvn_sample(cond.mean, chol_spd(cond.cov, "step 10 cov"), rng_);
  }

  // Step 11: smoothed response, then the iid noise variance.
  {
    const Vec resid = d.y - d.x * base.beta - u;
    const GaussianConditional cond = smoothed_response_conditional(
        keps(i, state_.noise.sigma_eps_prime_sq, state_.noise.rho_eps_prime), f, resid,
        s2_eps);
    Vec f_smooth = cond.mean;
    if (!d.active.empty()) {
      const int m = static_cast<int>(d.active.size());
      Mat sub(m, m);
      Vec mean_sub(m);
      for (int a = 0; a < m; ++a) {
        mean_sub[a] = cond.mean[d.active[a]];
        for (int b = 0; b < m; ++b) sub(a, b) = cond.cov(d.active[a], d.active[b]);
      }
      const Vec draw = mvn_sample(mean_sub, chol_spd(sub, "step 11 cov"), rng_);
      for (int a = 0; a < m; ++a) f_smooth[d.active[a]] = draw[a];
    }
    const auto [shape, rate] = sigma_eps_posterior(h_.s_eps, h_.nu_eps, resid - f_smooth);
    state_.noise.sigma_eps_sq[i] = rng_.inverse_gamma(shape, rate);
  }
}

void GibbsSampler::update_concentrations() {
  current_block_ = "concentrations (steps 12-13)";
  if (h_.pin_assignments) return;
  // In the truncated stick-breaking state the concentration is conjugate to
  // the sticks: M | V ~ Gamma(c + K - 1, d - sum_{k<K} log(1 - V_k)). The
  // occupied-cluster auxiliary scheme (concentration_gamma_mixture) targets
  // the untruncated process and is not a valid conditional here.
  const auto draw = [this](const Vec& sticks, double c, double d) {
    const int k = static_cast<int>(sticks.size());
    double rate = d;
    for (int j = 0; j + 1 < k; ++j) rate -= std::log1p(-sticks[j]);
    return rng_.gamma(c + k - 1.0, 1.0 / rate);
  };
  state_.base_mix.concentration = draw(state_.base_mix.sticks, h_.c1, h_.d1);
  for (int d = 0; d < h_.n_types; ++d) {
    state_.resp_mix[d].concentration = draw(state_.resp_mix[d].sticks, h_.c2[d], h_.d2[d]);
  }
}

double GibbsSampler::gp_block_logpost(int i, double sigma_sq, double rho) const {
  const auto& comp = state_.base_comps[state_.base_mix.assignments[i]];
  double lp = mvn_logpdf(state_.random_effects[i].u,
                         chol_spd(ku(i, sigma_sq, rho), "step 14 K_u"));
  lp += normal_logpdf(std::log(sigma_sq), comp.mu_sigma_u_star, h_.var_sigma_u_within) +
        log_jacobian_log(sigma_sq);
  lp += normal_logpdf(logit_fwd(rho), comp.mu_rho_u_star, h_.var_rho_u_within) +
        log_jacobian_logit(rho);
  return lp;
}

void GibbsSampler::mh_update_gp_params(int i) {
  current_block_ = "MH GP parameters (step 14), individual " + std::to_string(i);
  auto& base = state_.baseline[i];
  const bool fixed_scale = cfg_.fixed_gp_scale > 0.0;
  const double cand_s2 =
      fixed_scale ? base.sigma_u_sq
                  : rng_.truncated_normal_positive(base.sigma_u_sq, cfg_.scale_real);
  const double cand_rho = rng_.reflected_normal_unit(base.rho_u, cfg_.scale_unit);
  double log_ratio = gp_block_logpost(i, cand_s2, cand_rho) -
                     gp_block_logpost(i, base.sigma_u_sq, base.rho_u);
  if (!fixed_scale) {
    // Hastings correction of the zero-truncated normal proposal.
    log_ratio += std::log(normal_cdf(base.sigma_u_sq / cfg_.scale_real)) -
                 std::log(normal_cdf(cand_s2 / cfg_.scale_real));
  }
  accept_.gp.proposed++;
  if (std::log(rng_.uniform()) < log_ratio) {
    base.sigma_u_sq = cand_s2;
    base.rho_u = cand_rho;
    accept_.gp.accepted++;
  }
}

double GibbsSampler::noise_block_logpost(std::span<const double> sigma_prime_sq,
                                         std::span<const double> rho_prime) const {
  double lp = 0.0;
  for (int i = 0; i < n_indiv(); ++i) {
    Mat cov = keps(i, sigma_prime_sq, rho_prime);
    cov.diagonal().array() += state_.noise.sigma_eps_sq[i];
    const Vec resid = data_[i].y - data_[i].x * state_.baseline[i].beta -
                      state_.random_effects[i].u - f_total_[i];
    lp += mvn_logpdf(resid, chol_spd(cov, "step 15 covariance"));
  }
  for (int d = 0; d < h_.n_types; ++d) {
    lp += normal_logpdf(std::log(sigma_prime_sq[d]), h_.mu_eps1, h_.var_eps1) +
          log_jacobian_log(sigma_prime_sq[d]);
    lp += normal_logpdf(logit_fwd(rho_prime[d]), h_.mu_eps2, h_.var_eps2) +
          log_jacobian_logit(rho_prime[d]);
  }
  return lp;
}

void GibbsSampler::mh_update_noise_params() {
  current_block_ = "MH noise parameters (step 15)";
  std::vector<double> cand_s2(h_.n_types), cand_rho(h_.n_types);
  double hastings = 0.0;
  for (int d = 0; d < h_.n_types; ++d) {
    cand_s2[d] = rng_.truncated_normal_positive(state_.noise.sigma_eps_prime_sq[d],
                                                cfg_.scale_real);
    cand_rho[d] = rng_.reflected_normal_unit(state_.noise.rho_eps_prime[d], cfg_.scale_unit);
    hastings +=
        std::log(normal_cdf(state_.noise.sigma_eps_prime_sq[d] / cfg_.scale_real)) -
        std::log(normal_cdf(cand_s2[d] / cfg_.scale_real));
  }
  const double log_ratio =
      noise_block_logpost(cand_s2, cand_rho) -
      noise_block_logpost(state_.noise.sigma_eps_prime_sq, state_.noise.rho_eps_prime) +
      hastings;
  accept_.noise.proposed++;
  if (std::log(rng_.uniform()) < log_ratio) {
    state_.noise.sigma_eps_prime_sq = std::move(cand_s2);
    state_.noise.rho_eps_prime = std::move(cand_rho);
    accept_.noise.accepted++;
  }
}

void GibbsSampler::mh_update_response_params(int i, int d) {
  Mat cov = keps(i, state_.noise.sigma_eps_prime_sq, state_.noise.rho_eps_prime);
  cov.diagonal().array() += state_.noise.sigma_eps_sq[i];
  mh_update_response_params(i, d, chol_spd(cov, "step 16 covariance"));
}

void GibbsSampler::mh_update_response_params(int i, int d, const CholeskySpd& cov_chol) {
  current_block_ = "MH response parameters (step 16), individual " + std::to_string(i) +
                   " type " + std::to_string(d + 1);
  accept_.response[d].proposed++;
  const ResponseParams& cur = state_.response[i][d];
  const double cur_ratio = response_ratio(cur);

  const double cand_a1 = rng_.normal(cur.alpha1, cfg_.scale_real);
  const double cand_a2 = rng_.reflected_normal_unit(cur.alpha2, cfg_.scale_unit);
  const double cand_a3 = rng_.reflected_normal_unit(cur.alpha3, cfg_.scale_unit);
  const double cand_gamma = rng_.normal(cur.gamma, cfg_.scale_real);
  const double cand_ratio = rng_.reflected_normal_unit(cur_ratio, cfg_.scale_unit);
  // Candidates outside the support (gamma <= 0, degenerate peak) have zero
  // posterior density: auto-reject.
  if (!(cand_gamma > 0.0) || cand_a1 == 0.0) return;
  const ResponseParams cand =
      make_response_from_ratio(cand_a1, cand_a2, cand_a3, cand_gamma, cand_ratio);

  // Work in (alpha1, alpha2, alpha3, gamma, ratio) coordinates: every proposal
  // is symmetric there, and the target density picks up the logit Jacobians of
  // the three (0,1) coordinates.
  const auto& dta = data_[i];
  const Vec base_resid = dta.y - dta.x * state_.baseline[i].beta -
                         state_.random_effects[i].u;
  const Vec5& mu = state_.resp_comps[d][state_.resp_mix[d].assignments[i]].mu_star;
  const auto log_post = [&](const ResponseParams& p, double ratio, const Vec& f_vec) {
    double lp = mvn_logpdf(base_resid - f_vec, cov_chol);
    const Vec5 t = response_to_unconstrained(p).v;
    for (int m = 0; m < 5; ++m) lp += normal_logpdf(t[m], mu[m], h_.var_resp_within[m]);
    lp -= std::log(p.alpha2) + std::log1p(-p.alpha2) + std::log(p.alpha3) +
          std::log1p(-p.alpha3) + std::log(ratio) + std::log1p(-ratio);
    return lp;
  };

  std::vector<ResponseParams> scratch = state_.response[i];
  scratch[d] = cand;
  const Vec f_cand_type = cumulative_response(std::span<const ResponseParams>(scratch),
                                              dta.events_by_type[d], dta.t);
  const Vec f_cand = f_total_[i] - f_by_type_[i][d] + f_cand_type;
  const double log_ratio =
      log_post(cand, cand_ratio, f_cand) - log_post(cur, cur_ratio, f_total_[i]);
  if (std::log(rng_.uniform()) < log_ratio) {
    state_.response[i][d] = cand;
    f_total_[i] = f_cand;
    f_by_type_[i][d] = f_cand_type;
    accept_.response[d].accepted++;
  }
}

void GibbsSampler::sweep() {
  update_baseline_components();
  for (int d = 0; d < h_.n_types; ++d) update_response_components(d);
  for (int i = 0; i < n_indiv(); ++i) update_individual_regression(i);
  update_concentrations();
  for (int i = 0; i < n_indiv(); ++i) mh_update_gp_params(i);
  mh_update_noise_params();
  for (int i = 0; i < n_indiv(); ++i) {
    Mat cov = keps(i, state_.noise.sigma_eps_prime_sq, state_.noise.rho_eps_prime);
    cov.diagonal().array() += state_.noise.sigma_eps_sq[i];
    const CholeskySpd chol = chol_spd(cov, "step 16 covariance");
    for (int d = 0; d < h_.n_types; ++d) mh_update_response_params(i, d, chol);
  }
  ++iteration_;
}

void GibbsSampler::set_outcomes(int i, const Vec& y) {
  if (y.size() != data_[i].y.size()) {
    throw std::invalid_argument("set_outcomes: length mismatch");
  }
  data_[i].y = y;
}

Vec GibbsSampler::sample_outcomes(int i, Rng& rng) {
  Mat cov = keps(i, state_.noise.sigma_eps_prime_sq, state_.noise.rho_eps_prime);
  cov.diagonal().array() += state_.noise.sigma_eps_sq[i];
  const Vec mean =
      data_[i].x * state_.baseline[i].beta + state_.random_effects[i].u + f_total_[i];
  return mvn_sample(mean, chol_spd(cov, "sample_outcomes"), rng);
}

void GibbsSampler::record_progress() const {
  std::cerr << "[chain " << chain_index_ << "] iteration " << iteration_ << "/"
            << cfg_.iterations << "  accept: gp=" << accept_.gp.rate()
            << " noise=" << accept_.noise.rate();
  for (int d = 0; d < h_.n_types; ++d) {
    std::cerr << " resp" << (d + 1) << "=" << accept_.response[d].rate();
  }
  std::cerr << "\n";
}

PosteriorTrace GibbsSampler::run() {
  const auto start = std::chrono::steady_clock::now();
  PosteriorTrace trace;
  trace.seed = cfg_.seed;
  trace.chain_index = chain_index_;
  trace.config = cfg_;
  try {
    init_from_prior();
    const int keep = (cfg_.iterations - cfg_.burn_in) / cfg_.thin;
    trace.draws.reserve(std::max(keep, 0));
    for (int it = 1; it <= cfg_.iterations; ++it) {
      sweep();
      if (it > cfg_.burn_in && (it - cfg_.burn_in) % cfg_.thin == 0) {
        trace.draws.push_back(state_);
      }
      if (cfg_.progress_every > 0 && it % cfg_.progress_every == 0) record_progress();
    }
  } catch (const std::exception& err) {
    throw NumericalError("chain " + std::to_string(chain_index_) + ", iteration " +
                         std::to_string(iteration_ + 1) + ", block [" + current_block_ +
                         "]: " + err.what());
  }
  trace.accept = accept_;
  trace.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

std::vector<PosteriorTrace> run_chains(const Cohort& cohort, const Hyperparams& h,
                                       const SamplerConfig& cfg) {
  cfg.validate();
  std::vector<PosteriorTrace> traces(cfg.chains);
  if (cfg.chains == 1) {
    traces[0] = GibbsSampler(cohort, h, cfg, 0).run();
    return traces;
  }
  std::vector<std::exception_ptr> errors(cfg.chains);
  std::vector<std::thread> workers;
  workers.reserve(cfg.chains);
  for (int c = 0; c < cfg.chains; ++c) {
    workers.emplace_back([&, c]() {
      try {
        traces[c] = GibbsSampler(cohort, h, cfg, c).run();
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return traces;
}

}  // namespace itr
