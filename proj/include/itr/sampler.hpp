#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "itr/dpm.hpp"
#include "itr/mvn.hpp"
#include "itr/rng.hpp"
#include "itr/types.hpp"

namespace itr {

struct SamplerConfig {
  int iterations = 5000;
  int burn_in = 2500;
  int thin = 1;
  int chains = 1;
  double scale_real = 0.3;   // normal proposal sd, unconstrained scalars
  double scale_unit = 0.15;  // reflected-normal proposal sd, (0,1) scalars
  std::uint64_t seed = 0;
  double fixed_gp_scale = 0.0;  // > 0: sigma_u^2 pinned to this value for all i
  int progress_every = 500;     // stderr progress period, 0 = silent

  void validate() const;
};

/// Every sampled quantity of one chain at one iteration.
struct ParamState {
  std::vector<BaselineParams> baseline;               // per individual
  std::vector<RandomEffect> random_effects;           // per individual
  std::vector<std::vector<ResponseParams>> response;  // [individual][type]
  NoiseParams noise;
  StickState base_mix;
  std::vector<BaselineComponent> base_comps;               // k1
  std::vector<StickState> resp_mix;                        // per type
  std::vector<std::vector<ResponseComponent>> resp_comps;  // [type][k]
};

struct BlockAccept {
  std::int64_t proposed = 0;
  std::int64_t accepted = 0;
  double rate() const { return proposed > 0 ? double(accepted) / double(proposed) : 0.0; }
};

struct AcceptStats {
  BlockAccept gp;
  BlockAccept noise;
  std::vector<BlockAccept> response;  // per type
};

struct PosteriorTrace {
  std::vector<ParamState> draws;
  AcceptStats accept;
  std::uint64_t seed = 0;
  int chain_index = 0;
  double elapsed_seconds = 0.0;
  SamplerConfig config;
};

struct GaussianConditional {
  Vec mean;
  Mat cov;
};

// Closed-form conditionals of the blocked Gibbs steps, exposed for oracle
// tests. All are pure functions of their inputs.

/// Component-mean posterior for a scalar with Gaussian base (base_mean,
/// base_var) and known within-component variance; obs are the transformed
/// member values. Returns (mean, var).
std::pair<double, double> scalar_mean_posterior(double base_mean, double base_var,
                                                double within_var,
                                                std::span<const double> obs);

/// Diagonal-Gaussian component-mean posterior for the transformed response
/// vectors. Returns (mean, var) componentwise.
std::pair<Vec5, Vec5> response_mean_posterior(const Vec5& base_mean, const Vec5& base_var,
                                              const Vec5& within_var,
                                              std::span<const Vec5> members);

/// beta_i | rest: precision Sigma*^{-1} + X'X/sigma_eps^2 against the residual
/// y - u - f.
GaussianConditional beta_conditional(const Mat& x, const Vec& resid, double sigma_eps_sq,
                                     const Vec& beta_star, const Mat& sigma_star);

/// Zero-mean GP conditional: prior N(0, k), iid observation noise. Written in
/// the factorization-friendly form mean = k (k + s2 I)^{-1} r.
GaussianConditional gp_conditional_zero_mean(const Mat& k, const Vec& resid,
                                             double sigma_eps_sq);

/// Smoothed-response conditional (step 11 auxiliary draw): prior N(f, k_eps),
/// iid noise around resid = y - X beta - u. Rows with no preceding treatment
/// have zero prior variance and stay at f exactly.
GaussianConditional smoothed_response_conditional(const Mat& k_eps, const Vec& f,
                                                  const Vec& resid, double sigma_eps_sq);

/// sigma_eps_i^2 | rest: inverse gamma (shape, rate).
std::pair<double, double> sigma_eps_posterior(double s_eps, double nu_eps,
                                              const Vec& resid_e);

/// Escobar-West concentration update: returns (weight of the first gamma
/// branch, shared rate d - log eta).
std::pair<double, double> concentration_gamma_mixture(double c, double d, int n_clusters,
                                                      int n_units, double eta);

/// One MCMC chain: owns a copy of the data, the current state and its RNG
/// stream. Individual update blocks are public so tests can drive them.
class GibbsSampler {
 public:
  GibbsSampler(const Cohort& cohort, const Hyperparams& h, const SamplerConfig& cfg,
               int chain_index = 0);

  void init_from_prior();
  void sweep();          // Appendix-B order: steps 1..16
  PosteriorTrace run();  // init + sweep loop + thinned recording

  // Blocked Gibbs and MH blocks (composites follow the printed step order;
  // the sub-steps are exposed so conditionals can be tested in isolation).
  void update_baseline_components();             // steps 1-5
  void update_baseline_locations();              // steps 1-3
  void update_baseline_sticks();                 // step 4
  void update_baseline_assignments();            // step 5
  void update_response_components(int d);        // steps 6-8
  void update_response_locations(int d);         // step 6
  void update_response_sticks(int d);            // step 7
  void update_response_assignments(int d);       // step 8
  void update_individual_regression(int i);      // steps 9-11
  void update_concentrations();                  // steps 12-13
  void mh_update_gp_params(int i);               // step 14
  void mh_update_noise_params();                 // step 15
  void mh_update_response_params(int i, int d);  // step 16

  /// Replaces individual i's outcomes (joint-distribution tests re-simulate
  /// data between sweeps).
  void set_outcomes(int i, const Vec& y);
  /// Draws Y_i from the observation model at the current state.
  Vec sample_outcomes(int i, Rng& rng);

  ParamState& state() { return state_; }
  const ParamState& state() const { return state_; }
  AcceptStats& accept_stats() { return accept_; }
  Rng& rng() { return rng_; }
  int n_indiv() const { return static_cast<int>(data_.size()); }
  const Hyperparams& hyper() const { return h_; }

  /// Treatment-noise kernel of individual i at the given noise parameters.
  Mat keps(int i, std::span<const double> sigma_prime_sq,
           std::span<const double> rho_prime) const;
  /// GP kernel of individual i.
  Mat ku(int i, double sigma_sq, double rho) const;
  /// Cached cumulative response of individual i at its observation times.
  const Vec& response_values(int i) const { return f_total_[i]; }

 private:
  struct IndivData {
    std::string id;
    Vec t;
    Vec y;
    Mat x;
    std::vector<TreatmentEvent> events;
    std::vector<std::vector<TreatmentEvent>> events_by_type;
    std::vector<int> active;  // observation indices with >= 1 preceding event
    Mat dt_abs;               // |t_j - t_j'|
    std::vector<Mat> pair_count;  // per type: events preceding both times
  };

  void rebuild_response_cache(int i);
  double gp_block_logpost(int i, double sigma_sq, double rho) const;
  double noise_block_logpost(std::span<const double> sigma_prime_sq,
                             std::span<const double> rho_prime) const;
  void mh_update_response_params(int i, int d, const CholeskySpd& cov_chol);
  void record_progress() const;

  std::vector<IndivData> data_;
  Hyperparams h_;
  SamplerConfig cfg_;
  int chain_index_ = 0;
  Rng rng_;
  ParamState state_;
  AcceptStats accept_;
  std::vector<Vec> f_total_;               // per i
  std::vector<std::vector<Vec>> f_by_type_;  // per i, per d
  int iteration_ = 0;
  std::string current_block_;
};

/// Runs cfg.chains chains (concurrently when more than one) with independent
/// RNG streams derived from cfg.seed.
std::vector<PosteriorTrace> run_chains(const Cohort& cohort, const Hyperparams& h,
                                       const SamplerConfig& cfg);

}  // namespace itr
