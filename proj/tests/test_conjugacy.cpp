#include <doctest.h>

#include <cmath>

#include "itr/kernels.hpp"
#include "itr/mvn.hpp"
#include "itr/sampler.hpp"

using namespace itr;

namespace {

// Trapezoid posterior mean of exp(log_density) over [lo, hi].
template <typename F>
double grid_posterior_mean(F&& log_density, double lo, double hi, int n = 200000) {
  double z = 0.0, m = 0.0;
  const double h = (hi - lo) / n;
  for (int k = 0; k <= n; ++k) {
    const double x = lo + k * h;
    const double w = (k == 0 || k == n) ? 0.5 : 1.0;
    const double f = std::exp(log_density(x));
    z += w * f;
    m += w * f * x;
  }
  return m / z;
}

}  // namespace

TEST_CASE("scalar component-mean posterior (steps 2-3)") {
  SUBCASE("no members returns the base") {
    const auto [m, v] = scalar_mean_posterior(1.5, 4.0, 0.01, {});
    CHECK(m == 1.5);
    CHECK(v == 4.0);
  }

  SUBCASE("grid oracle") {
    const std::vector<double> obs{-1.2, 0.4, 0.9};
    const double base_mean = 0.5, base_var = 2.0, within = 0.3;
    const auto [m, v] = scalar_mean_posterior(base_mean, base_var, within, obs);
    const auto log_post = [&](double mu) {
      double lp = normal_logpdf(mu, base_mean, base_var);
      for (double o : obs) lp += normal_logpdf(o, mu, within);
      return lp;
    };
    CHECK(m == doctest::Approx(grid_posterior_mean(log_post, -10.0, 10.0)).epsilon(1e-6));
    // Precision bookkeeping.
    CHECK(1.0 / v == doctest::Approx(1.0 / base_var + obs.size() / within).epsilon(1e-12));
  }
}

TEST_CASE("response component-mean posterior (step 6)") {
  const Vec5 base_mean = (Vec5() << 8.0, 0.0, 0.0, 10.0, 0.0).finished();
  const Vec5 base_var = Vec5::Constant(4.0);
  const Vec5 within = Vec5::Constant(0.09);

  SUBCASE("no members returns the base") {
    const auto [m, v] = response_mean_posterior(base_mean, base_var, within, {});
    CHECK(m.isApprox(base_mean));
    CHECK(v.isApprox(base_var));
  }

  SUBCASE("flat base collapses onto a single member") {
    const Vec5 t = (Vec5() << 7.0, 0.3, -0.2, 12.0, 0.5).finished();
    const std::vector<Vec5> members{t};
    const auto [m, v] =
        response_mean_posterior(base_mean, Vec5::Constant(1e12), within, members);
    CHECK((m - t).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("two members match the precision-weighted average") {
    const Vec5 t1 = (Vec5() << 7.0, 0.3, -0.2, 12.0, 0.5).finished();
    const Vec5 t2 = (Vec5() << 9.0, -0.1, 0.4, 9.0, -0.5).finished();
    const std::vector<Vec5> members{t1, t2};
    const auto [m, v] = response_mean_posterior(base_mean, base_var, within, members);
    for (int j = 0; j < 5; ++j) {
      const double prec = 1.0 / base_var[j] + 2.0 / within[j];
      const double direct =
          (base_mean[j] / base_var[j] + (t1[j] + t2[j]) / within[j]) / prec;
      CHECK(m[j] == doctest::Approx(direct).epsilon(1e-12));
      CHECK(v[j] == doctest::Approx(1.0 / prec).epsilon(1e-12));
    }
  }
}

TEST_CASE("beta conditional (step 9)") {
  SUBCASE("p = 1 grid oracle") {
    const Mat x = (Mat(3, 1) << 1.0, 1.0, 1.0).finished();
    const Vec resid = (Vec(3) << 1.8, 2.4, 2.1).finished();
    const double s2 = 0.25;
    const Vec beta_star = Vec::Constant(1, 0.5);
    const Mat sigma_star = Mat::Constant(1, 1, 4.0);
    const auto cond = beta_conditional(x, resid, s2, beta_star, sigma_star);
    const auto log_post = [&](double b) {
      double lp = normal_logpdf(b, 0.5, 4.0);
      for (int j = 0; j < 3; ++j) lp += normal_logpdf(resid[j], b, s2);
      return lp;
    };
    CHECK(cond.mean[0] ==
          doctest::Approx(grid_posterior_mean(log_post, -20.0, 20.0)).epsilon(1e-6));
  }

  SUBCASE("p = 2 alternative-algebra oracle") {
    Mat x(2, 2);
    x << 1.0, 0.2, 1.0, 0.9;
    const Vec resid = (Vec(2) << 3.0, 4.5).finished();
    const double s2 = 0.09;
    const Vec beta_star = (Vec(2) << 1.0, -0.5).finished();
    Mat sigma_star(2, 2);
    sigma_star << 2.0, 0.3, 0.3, 1.0;
    const auto cond = beta_conditional(x, resid, s2, beta_star, sigma_star);
    const Mat prec = sigma_star.inverse() + x.transpose() * x / s2;
    const Mat cov = prec.inverse();
    const Vec mean = cov * (x.transpose() * resid / s2 + sigma_star.inverse() * beta_star);
    CHECK(cond.mean.isApprox(mean, 1e-8));
    CHECK(cond.cov.isApprox(cov, 1e-8));
  }

  SUBCASE("infinite noise collapses to the component prior") {
    const Mat x = Mat::Ones(3, 1);
    const Vec resid = Vec::Ones(3);
    const auto cond = beta_conditional(x, resid, 1e14, Vec::Constant(1, 2.0),
                                       Mat::Constant(1, 1, 0.5));
    CHECK(cond.mean[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(cond.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  }

  SUBCASE("two-observation hand solve") {
    // resid = (b0 + b1 x) + e at x = (0, 1), near-flat prior: explicit 2x2
    // normal equations.
    Mat x(2, 2);
    x << 1.0, 0.0, 1.0, 1.0;
    const Vec resid = (Vec(2) << 1.0, 3.0).finished();
    const Vec beta_star = Vec::Zero(2);
    const Mat sigma_star = 100.0 * Mat::Identity(2, 2);
    const auto cond = beta_conditional(x, resid, 1.0, beta_star, sigma_star);
    Mat a(2, 2);
    a << 0.01 + 2.0, 1.0, 1.0, 0.01 + 1.0;  // prior precision + X'X
    const Vec direct = a.inverse() * x.transpose() * resid;
    CHECK(cond.mean.isApprox(direct, 1e-8));
  }
}

TEST_CASE("random-effect conditional (step 10)") {
  Vec t(3);
  t << 0.0, 5.0, 12.0;
  const Mat k = exp_kernel(0.04, 0.8, t);
  const Vec resid = (Vec(3) << 0.3, -0.2, 0.15).finished();
  const double s2 = 0.09;

  SUBCASE("inverse-form oracle") {
    const auto cond = gp_conditional_zero_mean(k, resid, s2);
    const Mat cov_direct = (k.inverse() + Mat::Identity(3, 3) / s2).inverse();
    const Vec mean_direct = cov_direct * resid / s2;
    CHECK(cond.mean.isApprox(mean_direct, 1e-8));
    CHECK(cond.cov.isApprox(cov_direct, 1e-8));
  }

  SUBCASE("scalar case closed form") {
    const Mat k1 = Mat::Constant(1, 1, 0.5);
    const auto cond = gp_conditional_zero_mean(k1, Vec::Constant(1, 2.0), 0.25);
    const double var = 1.0 / (1.0 / 0.5 + 1.0 / 0.25);
    CHECK(cond.cov(0, 0) == doctest::Approx(var).epsilon(1e-9));
    CHECK(cond.mean[0] == doctest::Approx(var * 2.0 / 0.25).epsilon(1e-9));
  }

  SUBCASE("vanishing prior kernel pins the mean at zero") {
    const Mat k0 = exp_kernel(1e-12, 0.8, t);
    const auto cond = gp_conditional_zero_mean(k0, resid, s2);
    CHECK(cond.mean.cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("smoothed-response conditional (step 11)") {
  Vec t(4);
  t << 5.0, 15.0, 30.0, 55.0;
  const std::vector<TreatmentEvent> events{{10.0, 1}};
  const std::vector<double> s2p{0.04}, rho{0.9};
  const Mat keps = treatment_noise_kernel(s2p, rho, t, events);
  const Vec f = (Vec(4) << 0.0, 1.5, 2.5, 0.5).finished();
  const Vec resid = (Vec(4) << 0.2, 1.9, 2.2, 0.4).finished();
  const double s2 = 0.09;

  const auto cond = smoothed_response_conditional(keps, f, resid, s2);

  // First time precedes the only event: point mass at f.
  CHECK(cond.mean[0] == f[0]);
  CHECK(cond.cov.row(0).cwiseAbs().maxCoeff() == 0.0);

  // Active block against the direct inverse-form conditional with prior
  // N(f_A, K_A) and iid observation noise.
  const Mat ka = keps.bottomRightCorner(3, 3);
  const Mat cov_direct = (ka.inverse() + Mat::Identity(3, 3) / s2).inverse();
  const Vec mean_direct = f.tail(3) + cov_direct * (resid.tail(3) - f.tail(3)) / s2;
  CHECK(cond.mean.tail(3).isApprox(mean_direct, 1e-8));
  CHECK(cond.cov.bottomRightCorner(3, 3).isApprox(cov_direct, 1e-8));
}

TEST_CASE("iid noise-variance posterior (step 11)") {
  const Vec resid = (Vec(4) << 0.3, -0.1, 0.2, -0.4).finished();
  const auto [shape, rate] = sigma_eps_posterior(1.0, 1.0, resid);
  CHECK(shape == doctest::Approx(1.0 + 2.0));
  CHECK(rate == doctest::Approx(1.0 + 0.5 * resid.squaredNorm()).epsilon(1e-14));

  // Draws follow the inverse gamma with that shape/rate.
  Rng rng(9);
  const int n = 200000;
  double mean = 0.0;
  for (int k = 0; k < n; ++k) mean += rng.inverse_gamma(shape, rate);
  mean /= n;
  const double expect = rate / (shape - 1.0);
  const double sd = rate / ((shape - 1.0) * std::sqrt(shape - 2.0));
  CHECK(std::abs(mean - expect) < 4.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("concentration update (steps 12-13)") {
  SUBCASE("mixture weights sum to one and share the rate") {
    for (double eta : {0.1, 0.5, 0.9}) {
      const auto [w1, rate] = concentration_gamma_mixture(1.0, 1.0, 4, 60, eta);
      CHECK(rate == doctest::Approx(1.0 - std::log(eta)).epsilon(1e-14));
      const double a = 1.0 + 4.0 - 1.0;
      const double w2 = 60.0 * rate / (a + 60.0 * rate);
      CHECK(w1 + w2 == doctest::Approx(1.0).epsilon(1e-14));
    }
  }

  SUBCASE("stationary distribution matches the Escobar-West density") {
    // Iterating (eta | M) then (M | eta, k) targets
    // p(M | k) ~ M^{c+k-1} e^{-dM} Gamma(M) / Gamma(M+I).
    const double c = 1.0, d = 1.0;
    const int k = 4, n_units = 30;
    const auto log_target = [&](double m) {
      return (c + k - 1.0) * std::log(m) - d * m + std::lgamma(m) -
             std::lgamma(m + n_units);
    };
    const double grid_mean = grid_posterior_mean(log_target, 1e-6, 40.0, 400000);

    Rng rng(31);
    double m = 1.0;
    double sum = 0.0;
    const int burn = 2000, keep = 400000;
    std::vector<double> batch_means;
    double batch_acc = 0.0;
    const int batch = 4000;
    for (int it = 0; it < burn + keep; ++it) {
      const double eta = rng.beta(m + 1.0, n_units);
      const auto [w1, rate] = concentration_gamma_mixture(c, d, k, n_units, eta);
      const double shape = rng.uniform() < w1 ? c + k : c + k - 1.0;
      m = rng.gamma(shape, 1.0 / rate);
      if (it >= burn) {
        sum += m;
        batch_acc += m;
        if ((it - burn + 1) % batch == 0) {
          batch_means.push_back(batch_acc / batch);
          batch_acc = 0.0;
        }
      }
    }
    const double chain_mean = sum / keep;
    double bvar = 0.0;
    for (double bm : batch_means) bvar += (bm - chain_mean) * (bm - chain_mean);
    bvar /= (batch_means.size() - 1.0);
    const double se = std::sqrt(bvar / batch_means.size());
    CHECK(std::abs(chain_mean - grid_mean) < 5.0 * se + 1e-4);
  }
}

TEST_CASE("sampler-level component updates on a toy cohort (steps 1-8)") {
  // Two individuals, one component occupied, one empty: the empty component's
  // conditional is the base, the occupied one follows the printed formulas.
  Cohort cohort;
  cohort.n_types = 1;
  for (int i = 0; i < 2; ++i) {
    Trajectory t;
    t.id = "i" + std::to_string(i);
    t.times = (Vec(2) << 1.0, 7.0).finished();
    t.outcomes = (Vec(2) << 0.5, 1.0).finished();
    t.covariates = Mat::Ones(2, 1);
    cohort.trajectories.push_back(t);
  }
  Hyperparams h = Hyperparams::defaults(1, 1);
  h.k1 = 2;
  h.k2 = {2};
  h.kappa0 = 1.0;
  h.nu0 = 3.0;
  h.beta0 = Vec::Zero(1);
  h.s0 = Mat::Identity(1, 1);
  SamplerConfig cfg;
  cfg.iterations = 2;
  cfg.burn_in = 1;
  cfg.seed = 12;
  GibbsSampler sampler(cohort, h, cfg);
  sampler.init_from_prior();

  auto& st = sampler.state();
  st.base_mix.assignments = {0, 0};
  st.baseline[0].beta = Vec::Constant(1, 2.0);
  st.baseline[1].beta = Vec::Constant(1, 4.0);

  // Step-1 statistics: one cluster with both members, kappa0 = 1, beta0 = 0
  // gives kappa = 3 and m = (2+4)/3; a single-member cluster would give
  // m = beta_i / 2 and kappa = 2.
  {
    const std::vector<Vec> members{st.baseline[0].beta, st.baseline[1].beta};
    const NiwParams post = niw_posterior({h.beta0, h.kappa0, h.nu0, h.s0}, members);
    CHECK(post.kappa == 3.0);
    CHECK(post.mean[0] == doctest::Approx(2.0).epsilon(1e-14));
    const NiwParams single =
        niw_posterior({h.beta0, h.kappa0, h.nu0, h.s0}, {members.data(), 1});
    CHECK(single.kappa == 2.0);
    CHECK(single.mean[0] == doctest::Approx(1.0).epsilon(1e-14));  // beta_i / 2
  }

  // Step 5 with equal component parameters: assignment probabilities reduce
  // to the stick weights.
  st.base_comps[1] = st.base_comps[0];
  st.base_mix.sticks = (Vec(2) << 0.75, 1.0).finished();
  st.base_mix.weights = stick_weights(st.base_mix.sticks);
  int hits = 0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    sampler.update_baseline_assignments();
    hits += st.base_mix.assignments[0] == 0 ? 1 : 0;
  }
  const double freq = double(hits) / reps;
  CHECK(std::abs(freq - 0.75) < 4.0 * std::sqrt(0.75 * 0.25 / reps));
}
