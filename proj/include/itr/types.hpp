#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace itr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec5 = Eigen::Matrix<double, 5, 1>;

/// Thrown when a linear-algebra operation fails (non-PD covariance after
/// jitter, singular solve). Carries enough context to locate the failure.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One treatment administration. kind is 1-based (1..D).
struct TreatmentEvent {
  double time = 0.0;  // minutes
  int kind = 1;
};

/// One individual's irregularly sampled series: outcomes, covariates and
/// treatment events. Times are minutes and strictly increasing.
struct Trajectory {
  std::string id;
  Vec times;                                // J
  Vec outcomes;                             // J
  Mat covariates;                           // J x p, first column is 1
  std::vector<TreatmentEvent> treatments;   // sorted by time

  int n_obs() const { return static_cast<int>(times.size()); }
  int n_cov() const { return static_cast<int>(covariates.cols()); }

  void validate(int n_types) const;
};

struct Cohort {
  std::vector<Trajectory> trajectories;
  int n_types = 0;

  int n_indiv() const { return static_cast<int>(trajectories.size()); }
  void validate() const;
};

/// Per-individual baseline progression parameters (beta_i, sigma_ui^2, rho_ui).
struct BaselineParams {
  Vec beta;
  double sigma_u_sq = 1.0;  // > 0
  double rho_u = 0.5;       // in (0,1)

  void validate() const;
};

/// Double-sigmoid response curve parameters. The stabilization value b is
/// constrained so that b/g(gamma) lies in (0,1); construct through
/// make_response_from_raw / make_response_from_ratio (curves.hpp) which
/// enforce and clamp that ratio.
struct ResponseParams {
  double alpha1 = 0.0;  // peak direction/magnitude, real
  double alpha2 = 0.5;  // first sigmoid steepness, in (0,1)
  double alpha3 = 0.5;  // second sigmoid steepness, in (0,1)
  double gamma = 1.0;   // switch point, minutes, > 0
  double b = 0.0;       // stabilization value
};

/// Noise parameters for the whole cohort: iid variance per individual plus a
/// structured component (scale, smoothness) per treatment type.
struct NoiseParams {
  std::vector<double> sigma_eps_sq;        // per individual, > 0
  std::vector<double> sigma_eps_prime_sq;  // per type, > 0
  std::vector<double> rho_eps_prime;       // per type, in (0,1)

  void validate() const;
};

/// GP random-effect values at one individual's observation times.
struct RandomEffect {
  Vec u;
};

}  // namespace itr
