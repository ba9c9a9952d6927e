#include "itr/dpm.hpp"

#include <cmath>

#include "itr/curves.hpp"
#include "itr/mvn.hpp"
#include "itr/transforms.hpp"

namespace itr {

Vec stick_weights(const Vec& sticks) {
  const int k = static_cast<int>(sticks.size());
  if (k < 1) throw std::invalid_argument("stick_weights: empty stick vector");
  if (sticks[k - 1] != 1.0) {
    throw std::invalid_argument("stick_weights: last stick must equal 1");
  }
  Vec w(k);
  double remaining = 1.0;
  for (int j = 0; j < k; ++j) {
    if (!(sticks[j] > 0.0 && sticks[j] <= 1.0)) {
      throw std::invalid_argument("stick_weights: stick outside (0,1]");
    }
    w[j] = j + 1 < k ? sticks[j] * remaining : remaining;
    remaining *= 1.0 - sticks[j];
  }
  return w;
}

double truncation_error_bound(int n, int truncation, double concentration) {
  if (n < 1 || truncation < 1 || !(concentration > 0.0)) {
    throw std::invalid_argument("truncation_error_bound: invalid arguments");
  }
  return 4.0 * n * std::exp(-(truncation - 1) / concentration);
}

Hyperparams Hyperparams::defaults(int p, int n_types) {
  Hyperparams h;
  h.p = p;
  h.n_types = n_types;
  h.k1 = 20;
  h.k2.assign(n_types, 20);
  h.beta0 = Vec::Zero(p);
  h.kappa0 = 1.0;
  h.nu0 = p + 2.0;
  h.s0 = Mat::Identity(p, p);
  h.mu_sigma_u_base = std::log(0.01);
  h.var_sigma_u_base = 4.0;
  h.mu_rho_u_base = 0.0;
  h.var_rho_u_base = 4.0;
  h.var_sigma_u_within = 0.01;
  h.var_rho_u_within = 0.01;
  h.mu_resp_base.assign(n_types, (Vec5() << 0.0, 0.0, 0.0, 10.0, 0.0).finished());
  h.var_resp_base.assign(n_types, Vec5::Constant(4.0));
  h.var_resp_within = Vec5::Constant(0.09);
  h.s_eps = 1.0;
  h.nu_eps = 1.0;
  h.mu_eps1 = std::log(0.01);
  h.var_eps1 = 0.09;
  h.mu_eps2 = 0.0;
  h.var_eps2 = 4.0;
  h.c1 = 1.0;
  h.d1 = 1.0;
  h.c2.assign(n_types, 1.0);
  h.d2.assign(n_types, 1.0);
  return h;
}

void Hyperparams::validate() const {
  if (p < 1 || n_types < 1) throw std::invalid_argument("Hyperparams: p and n_types must be >= 1");
  if (k1 < 1) throw std::invalid_argument("Hyperparams: k1 must be >= 1");
  if (static_cast<int>(k2.size()) != n_types || static_cast<int>(mu_resp_base.size()) != n_types ||
      static_cast<int>(var_resp_base.size()) != n_types ||
      static_cast<int>(c2.size()) != n_types || static_cast<int>(d2.size()) != n_types) {
    throw std::invalid_argument("Hyperparams: per-type vectors sized inconsistently");
  }
  for (int v : k2) {
    if (v < 1) throw std::invalid_argument("Hyperparams: k2 must be >= 1");
  }
  if (beta0.size() != p || s0.rows() != p || s0.cols() != p) {
    throw std::invalid_argument("Hyperparams: beta0/S0 dimensions must match p");
  }
  if (!(kappa0 > 0.0) || !(nu0 > p - 1)) {
    throw std::invalid_argument("Hyperparams: kappa0 > 0 and nu0 > p-1 required");
  }
  for (double v : {var_sigma_u_base, var_rho_u_base, var_sigma_u_within, var_rho_u_within,
                   s_eps, nu_eps, var_eps1, var_eps2, c1, d1}) {
    if (!(v > 0.0)) throw std::invalid_argument("Hyperparams: scale parameter must be positive");
  }
  for (int d = 0; d < n_types; ++d) {
    if (!(c2[d] > 0.0 && d2[d] > 0.0) || (var_resp_base[d].array() <= 0.0).any()) {
      throw std::invalid_argument("Hyperparams: per-type scale parameter must be positive");
    }
  }
  if ((var_resp_within.array() <= 0.0).any()) {
    throw std::invalid_argument("Hyperparams: var_resp_within must be positive");
  }
}

BaselineComponent sample_base_baseline(const Hyperparams& h, Rng& rng) {
  BaselineComponent c;
  if (h.sigma_star_fixed > 0.0) {
    c.sigma_star = h.sigma_star_fixed * Mat::Identity(h.p, h.p);
    Vec z(h.p);
    for (int j = 0; j < h.p; ++j) z[j] = rng.normal();
    c.beta_star = h.beta0 + chol_spd(c.sigma_star / h.kappa0, "base sigma*").lower * z;
  } else {
    auto [beta, sigma] = sample_niw(NiwParams{h.beta0, h.kappa0, h.nu0, h.s0}, rng);
    c.beta_star = std::move(beta);
    c.sigma_star = std::move(sigma);
  }
  c.mu_sigma_u_star = rng.normal(h.mu_sigma_u_base, std::sqrt(h.var_sigma_u_base));
  c.mu_rho_u_star = rng.normal(h.mu_rho_u_base, std::sqrt(h.var_rho_u_base));
  return c;
}

ResponseComponent sample_base_response(const Hyperparams& h, int d, Rng& rng) {
  ResponseComponent c;
  for (int j = 0; j < 5; ++j) {
    c.mu_star[j] = rng.normal(h.mu_resp_base[d][j], std::sqrt(h.var_resp_base[d][j]));
  }
  return c;
}

double dpm_log_density_baseline(const BaselineParams& params, const StickState& stick,
                                std::span<const BaselineComponent> comps,
                                const Hyperparams& h) {
  params.validate();
  const int k = static_cast<int>(comps.size());
  if (stick.weights.size() != k || k == 0) {
    throw std::invalid_argument("dpm_log_density_baseline: weights/components mismatch");
  }
  const double log_s2 = std::log(params.sigma_u_sq);
  const double logit_rho = logit_fwd(params.rho_u);
  Vec log_terms(k);
  for (int j = 0; j < k; ++j) {
    const Vec r = params.beta - comps[j].beta_star;
    const auto chol = chol_spd(comps[j].sigma_star, "dpm baseline Sigma*");
    log_terms[j] = std::log(stick.weights[j]) + mvn_logpdf(r, chol) +
                   normal_logpdf(log_s2, comps[j].mu_sigma_u_star, h.var_sigma_u_within) +
                   normal_logpdf(logit_rho, comps[j].mu_rho_u_star, h.var_rho_u_within);
  }
  const double m = log_terms.maxCoeff();
  const double mix = m + std::log((log_terms.array() - m).exp().sum());
  return mix + log_jacobian_log(params.sigma_u_sq) + log_jacobian_logit(params.rho_u);
}

double dpm_log_density_response(const ResponseParams& params, const StickState& stick,
                                std::span<const ResponseComponent> comps,
                                const Hyperparams& h) {
  const int k = static_cast<int>(comps.size());
  if (stick.weights.size() != k || k == 0) {
    throw std::invalid_argument("dpm_log_density_response: weights/components mismatch");
  }
  const Vec5 t = response_to_unconstrained(params).v;
  Vec log_terms(k);
  for (int j = 0; j < k; ++j) {
    double lp = std::log(stick.weights[j]);
    for (int m = 0; m < 5; ++m) {
      lp += normal_logpdf(t[m], comps[j].mu_star[m], h.var_resp_within[m]);
    }
    log_terms[j] = lp;
  }
  const double m = log_terms.maxCoeff();
  const double mix = m + std::log((log_terms.array() - m).exp().sum());
  return mix + log_jacobian_response(params);
}

NiwParams niw_posterior(const NiwParams& prior, std::span<const Vec> members) {
  const int n = static_cast<int>(members.size());
  NiwParams post;
  post.kappa = prior.kappa + n;
  post.df = prior.df + n;
  Vec sum = Vec::Zero(prior.mean.size());
  Mat scatter = Mat::Zero(prior.scale.rows(), prior.scale.cols());
  for (const Vec& b : members) {
    sum += b;
    scatter += b * b.transpose();
  }
  post.mean = (prior.kappa * prior.mean + sum) / post.kappa;
  post.scale = prior.scale + scatter + prior.kappa * prior.mean * prior.mean.transpose() -
               post.kappa * post.mean * post.mean.transpose();
  post.scale = 0.5 * (post.scale + post.scale.transpose()).eval();
  return post;
}

Mat sample_inverse_wishart(double df, const Mat& scale, Rng& rng) {
  const int p = static_cast<int>(scale.rows());
  if (!(df > p - 1)) throw std::invalid_argument("sample_inverse_wishart: df too small");
  // Bartlett factor of W ~ Wishart(df, scale^{-1}); the IW draw is W^{-1}.
  const Mat scale_inv = chol_spd(scale, "IW scale").solve(Mat::Identity(p, p));
  const Mat l = chol_spd(scale_inv, "IW scale inverse").lower;
  Mat a = Mat::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    a(j, j) = std::sqrt(rng.chi_squared(df - j));
    for (int m = 0; m < j; ++m) a(j, m) = rng.normal();
  }
  const Mat f = l * a;  // chol factor of W
  const Mat f_inv = f.triangularView<Eigen::Lower>().solve(Mat::Identity(p, p));
  Mat out = f_inv.transpose() * f_inv;
  return 0.5 * (out + out.transpose());
}

std::pair<Vec, Mat> sample_niw(const NiwParams& niw, Rng& rng) {
  Mat sigma = sample_inverse_wishart(niw.df, niw.scale, rng);
  Vec z(niw.mean.size());
  for (int j = 0; j < z.size(); ++j) z[j] = rng.normal();
  Vec beta = niw.mean + chol_spd(sigma / niw.kappa, "NIW mean cov").lower * z;
  return {std::move(beta), std::move(sigma)};
}

}  // namespace itr
