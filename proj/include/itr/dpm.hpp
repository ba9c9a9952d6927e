#pragma once

#include <span>
#include <vector>

#include "itr/rng.hpp"
#include "itr/types.hpp"

namespace itr {

/// Truncated stick-breaking state for one mixture: sticks V_1..V_K (V_K = 1),
/// derived weights, concentration M and per-unit assignments.
struct StickState {
  Vec sticks;
  Vec weights;
  double concentration = 1.0;
  std::vector<int> assignments;  // 0-based component index per unit
};

/// weights_k = V_k prod_{r<k} (1 - V_r); requires V_k in (0,1], V_K = 1.
Vec stick_weights(const Vec& sticks);

/// Ishwaran-James L1 truncation bound 4 n exp(-(K-1)/M).
double truncation_error_bound(int n, int truncation, double concentration);

/// Baseline mixture component: NIW location/scale for beta plus the component
/// means of the transformed GP parameters.
struct BaselineComponent {
  Vec beta_star;
  Mat sigma_star;
  double mu_sigma_u_star = 0.0;  // mean of log(sigma_u^2)
  double mu_rho_u_star = 0.0;    // mean of logit(rho_u)
};

/// Response mixture component: mean of the transformed 5-vector.
struct ResponseComponent {
  Vec5 mu_star = Vec5::Zero();
};

/// All fixed hyperparameters of the hierarchical model.
struct Hyperparams {
  int p = 3;        // covariate dimension
  int n_types = 2;  // D
  int k1 = 20;      // baseline truncation
  std::vector<int> k2;  // per-type truncation

  // NIW base for (beta*, Sigma*): (beta0, kappa0, nu0, S0).
  Vec beta0;
  double kappa0 = 1.0;
  double nu0 = 5.0;
  Mat s0;

  // Base distributions of the component means of transformed GP parameters.
  double mu_sigma_u_base = 0.0, var_sigma_u_base = 4.0;  // mu_sigma'0, sigma^2_sigma'0
  double mu_rho_u_base = 0.0, var_rho_u_base = 4.0;      // mu_rho'0, sigma^2_rho'0
  // Within-component spreads of the transformed GP parameters.
  double var_sigma_u_within = 0.01;  // sigma^2_sigma'u0
  double var_rho_u_within = 0.01;    // sigma^2_rho'u0

  // Response bases per type (mu_d0, diag D_d0) and the shared within-component
  // diagonal D_phi'0.
  std::vector<Vec5> mu_resp_base;
  std::vector<Vec5> var_resp_base;
  Vec5 var_resp_within = Vec5::Constant(0.09);

  // Noise priors: sigma_eps_i^2 ~ IG(s_eps, nu_eps); log sigma_eps'd^2 and
  // logit rho_eps'd get Gaussian priors.
  double s_eps = 1.0, nu_eps = 1.0;
  double mu_eps1 = 0.0, var_eps1 = 0.09;
  double mu_eps2 = 0.0, var_eps2 = 4.0;

  // Concentration priors M1 ~ Gamma(c1, d1), M2d ~ Gamma(c2d, d2d).
  double c1 = 1.0, d1 = 1.0;
  std::vector<double> c2, d2;

  // Structured-noise window W_d (0 = no truncation of the printed covariance).
  double noise_window_minutes = 0.0;

  // Variant machinery (evaluate module). sigma_star_fixed > 0 pins every
  // Sigma*_k to sigma_star_fixed * I instead of sampling it from the NIW;
  // pin_assignments freezes Z_i = i and skips stick/assignment/concentration
  // updates (the "individual" variant).
  double sigma_star_fixed = 0.0;
  bool pin_assignments = false;

  static Hyperparams defaults(int p, int n_types);
  void validate() const;
};

/// Draw a baseline component from the base distribution (Eq. 8 last line).
BaselineComponent sample_base_baseline(const Hyperparams& h, Rng& rng);
/// Draw a response component for type d from its Gaussian base.
ResponseComponent sample_base_response(const Hyperparams& h, int d, Rng& rng);

/// Log of the truncated mixture density of one individual's baseline
/// parameters, Jacobian adjustments included.
double dpm_log_density_baseline(const BaselineParams& params, const StickState& stick,
                                std::span<const BaselineComponent> comps,
                                const Hyperparams& h);

/// Log of the truncated mixture density of one response-parameter set.
double dpm_log_density_response(const ResponseParams& params, const StickState& stick,
                                std::span<const ResponseComponent> comps,
                                const Hyperparams& h);

/// Normal-inverse-Wishart parameter block.
struct NiwParams {
  Vec mean;
  double kappa = 1.0;
  double df = 1.0;
  Mat scale;
};

/// Conjugate NIW update from member vectors (blocked Gibbs step 1 formulas).
NiwParams niw_posterior(const NiwParams& prior, std::span<const Vec> members);

Mat sample_inverse_wishart(double df, const Mat& scale, Rng& rng);

/// Draw (beta*, Sigma*) from a NIW: Sigma* ~ IW(df, scale), beta* ~ N(mean, Sigma*/kappa).
std::pair<Vec, Mat> sample_niw(const NiwParams& niw, Rng& rng);

}  // namespace itr
