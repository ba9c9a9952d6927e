#include <doctest.h>

#include <cmath>

#include "itr/curves.hpp"
#include "itr/evaluate.hpp"
#include "itr/kernels.hpp"
#include "itr/simulator.hpp"

using namespace itr;

namespace {

// Cohort with known structural means: outcomes equal X beta exactly, no
// treatments, so forecasts are analytically transparent.
Cohort linear_cohort(int n_indiv, int n_obs, const Vec& beta) {
  Cohort c;
  c.n_types = 1;
  for (int i = 0; i < n_indiv; ++i) {
    Trajectory t;
    t.id = "lin" + std::to_string(i);
    t.times.resize(n_obs);
    t.covariates.resize(n_obs, 2);
    for (int j = 0; j < n_obs; ++j) {
      t.times[j] = 10.0 * (j + 1) + i;
      t.covariates(j, 0) = 1.0;
      t.covariates(j, 1) = t.times[j] / 100.0;
    }
    t.outcomes = t.covariates * beta;
    c.trajectories.push_back(std::move(t));
  }
  return c;
}

// Minimal one-individual draw with the given parameters.
ParamState draw_for(const Cohort& cohort, const Vec& beta, double sigma_u_sq, double rho_u,
                    double sigma_eps_sq) {
  ParamState s;
  const int n = cohort.n_indiv();
  s.baseline.assign(n, BaselineParams{beta, sigma_u_sq, rho_u});
  s.random_effects.resize(n);
  for (int i = 0; i < n; ++i) {
    s.random_effects[i].u = Vec::Zero(cohort.trajectories[i].n_obs());
  }
  s.response.assign(
      n, std::vector<ResponseParams>{make_response_from_ratio(2.0, 0.5, 0.5, 10.0, 0.5)});
  s.noise.sigma_eps_sq.assign(n, sigma_eps_sq);
  s.noise.sigma_eps_prime_sq = {1e-12};
  s.noise.rho_eps_prime = {0.5};
  s.base_mix.weights = Vec::Constant(1, 1.0);
  s.base_mix.sticks = Vec::Constant(1, 1.0);
  s.base_mix.assignments.assign(n, 0);
  s.resp_mix.resize(1);
  s.resp_mix[0].weights = Vec::Constant(1, 1.0);
  s.resp_mix[0].sticks = Vec::Constant(1, 1.0);
  s.resp_mix[0].assignments.assign(n, 0);
  s.base_comps.resize(1);
  s.base_comps[0].beta_star = beta;
  s.base_comps[0].sigma_star = Mat::Identity(2, 2);
  s.resp_comps.resize(1);
  s.resp_comps[0].resize(1);
  return s;
}

}  // namespace

TEST_CASE("posterior_predict matches a hand-computed 3x3 conditioning") {
  // Two training points, one future point, pure GP (no treatments).
  Cohort cohort;
  cohort.n_types = 1;
  Trajectory t;
  t.id = "toy";
  t.times = (Vec(3) << 0.0, 10.0, 25.0).finished();
  t.covariates = Mat::Ones(3, 1);
  t.outcomes = (Vec(3) << 1.3, 0.8, 0.0).finished();
  cohort.trajectories.push_back(t);

  const double s2u = 0.5, rho = 0.9, s2e = 0.04;
  ParamState s;
  s.baseline = {BaselineParams{Vec::Constant(1, 1.0), s2u, rho}};
  s.random_effects = {RandomEffect{Vec::Zero(3)}};
  s.response = {{make_response_from_ratio(1.0, 0.5, 0.5, 5.0, 0.5)}};
  s.noise.sigma_eps_sq = {s2e};
  s.noise.sigma_eps_prime_sq = {1e-12};
  s.noise.rho_eps_prime = {0.5};

  const auto req = ForecastRequest::held_out(cohort.trajectories[0], 2);
  Rng rng(1);
  const Hyperparams h = Hyperparams::defaults(1, 1);
  const Forecast fc = posterior_predict(s, 0, cohort.trajectories[0], req, h, rng);

  // Direct Schur complement on the 3x3 joint kernel.
  const Mat k = exp_kernel(s2u, rho, cohort.trajectories[0].times);
  Mat ctt = k.topLeftCorner(2, 2);
  ctt.diagonal().array() += s2e;
  const Vec r = cohort.trajectories[0].outcomes.head(2) - Vec::Constant(2, 1.0);
  const double mean_direct = 1.0 + (k.bottomLeftCorner(1, 2) * ctt.inverse() * r)(0, 0);
  CHECK(fc.mean[0] == doctest::Approx(mean_direct).epsilon(1e-9));
}

TEST_CASE("forecast means shift by the added future response curves") {
  Cohort cohort = linear_cohort(1, 8, (Vec(2) << 3.0, 2.0).finished());
  const ParamState s = draw_for(cohort, (Vec(2) << 3.0, 2.0).finished(), 0.2, 0.8, 0.05);

  auto req = ForecastRequest::held_out(cohort.trajectories[0], 5);
  Rng rng(3);
  const Hyperparams h = Hyperparams::defaults(2, 1);
  const Forecast base = posterior_predict(s, 0, cohort.trajectories[0], req, h, rng);

  auto req2 = req;
  const double tau = cohort.trajectories[0].times[4] + 1.0;
  req2.future_events.push_back(TreatmentEvent{tau, 1});
  const Forecast shifted = posterior_predict(s, 0, cohort.trajectories[0], req2, h, rng);
  for (int j = 0; j < req.future_times.size(); ++j) {
    const double g = req.future_times[j] > tau
                         ? eval_response_curve(s.response[0][0], req.future_times[j] - tau)
                         : 0.0;
    // sigma_eps'^2 is ~0 in this draw, so only the mean moves.
    CHECK(shifted.mean[j] == doctest::Approx(base.mean[j] + g).epsilon(1e-6));
  }
}

TEST_CASE("far horizon with decorrelated kernel returns the fixed effects") {
  Cohort cohort = linear_cohort(1, 10, (Vec(2) << 3.0, 2.0).finished());
  // Observed outcomes deviate from X beta so the residual is nonzero.
  cohort.trajectories[0].outcomes.array() += 1.5;
  const Vec beta = (Vec(2) << 3.0, 2.0).finished();
  const ParamState s = draw_for(cohort, beta, 0.3, 1e-6, 0.05);  // rho ~ 0
  const auto req = ForecastRequest::held_out(cohort.trajectories[0], 5);
  Rng rng(5);
  const Forecast fc =
      posterior_predict(s, 0, cohort.trajectories[0], req, Hyperparams::defaults(2, 1), rng);
  const Vec xb = req.future_covariates * beta;
  CHECK((fc.mean - xb).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("training observation is reproduced as noise vanishes") {
  Cohort cohort = linear_cohort(1, 6, (Vec(2) << 3.0, 2.0).finished());
  cohort.trajectories[0].outcomes[2] += 0.7;  // a bump the GP must carry
  const Vec beta = (Vec(2) << 3.0, 2.0).finished();
  const ParamState s = draw_for(cohort, beta, 0.4, 0.95, 1e-10);
  ForecastRequest req;
  req.cutoff = 6;
  req.future_times = Vec::Constant(1, cohort.trajectories[0].times[2]);
  req.future_covariates = cohort.trajectories[0].covariates.row(2);
  Rng rng(7);
  const Forecast fc =
      posterior_predict(s, 0, cohort.trajectories[0], req, Hyperparams::defaults(2, 1), rng);
  CHECK(fc.mean[0] == doctest::Approx(cohort.trajectories[0].outcomes[2]).epsilon(1e-6));
}

TEST_CASE("held-out RMSE protocol") {
  const Vec beta = (Vec(2) << 3.0, 2.0).finished();
  Cohort cohort = linear_cohort(3, 9, beta);
  const int cutoff = 5;
  // Kernel ~ 0 makes the forecast equal X_fut beta exactly.
  const ParamState exact = draw_for(cohort, beta, 1e-12, 1e-6, 0.05);
  Vec beta_off = beta;
  beta_off[0] += 2.0;
  const ParamState offset = draw_for(cohort, beta_off, 1e-12, 1e-6, 0.05);
  const Hyperparams h = Hyperparams::defaults(2, 1);

  SUBCASE("exact predictions give zero RMSE") {
    PosteriorTrace tr;
    tr.draws = {exact};
    const RmseReport rep = evaluate_rmse({tr}, cohort, cutoff, 30.0, h);
    CHECK(rep.overall.rmse < 1e-8);
    CHECK(rep.overall.n_obs == 3 * 4);
  }

  SUBCASE("constant offset gives |c|") {
    PosteriorTrace tr;
    tr.draws = {offset};
    const RmseReport rep = evaluate_rmse({tr}, cohort, cutoff, 30.0, h);
    CHECK(rep.overall.rmse == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(rep.overall.ci_lo == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(rep.overall.ci_hi == doctest::Approx(2.0).epsilon(1e-7));
  }

  SUBCASE("two draws average before the RMSE of means") {
    // Mean prediction offset is 1, per-draw RMSEs are 0 and 2: the interval
    // spans the per-draw values while the point estimate uses the mean.
    PosteriorTrace tr;
    tr.draws = {exact, offset};
    const RmseReport rep = evaluate_rmse({tr}, cohort, cutoff, 30.0, h);
    CHECK(rep.overall.rmse == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(rep.overall.ci_lo == doctest::Approx(0.025 * 2.0).epsilon(1e-6));
    CHECK(rep.overall.ci_hi == doctest::Approx(0.975 * 2.0).epsilon(1e-6));
  }

  SUBCASE("invariant to chain order and individual permutation") {
    PosteriorTrace a, b;
    a.draws = {exact};
    b.draws = {offset};
    const RmseReport r1 = evaluate_rmse({a, b}, cohort, cutoff, 30.0, h);
    const RmseReport r2 = evaluate_rmse({b, a}, cohort, cutoff, 30.0, h);
    CHECK(r1.overall.rmse == doctest::Approx(r2.overall.rmse).epsilon(1e-12));
    CHECK(r1.overall.ci_lo == doctest::Approx(r2.overall.ci_lo).epsilon(1e-12));

    Cohort permuted = cohort;
    std::swap(permuted.trajectories[0], permuted.trajectories[2]);
    const RmseReport r3 = evaluate_rmse({a, b}, permuted, cutoff, 30.0, h);
    CHECK(r3.overall.rmse == doctest::Approx(r1.overall.rmse).epsilon(1e-10));
  }
}

TEST_CASE("variant hyperparameter mappings") {
  const Hyperparams h = Hyperparams::defaults(3, 2);

  SUBCASE("itr is the identity") {
    const Hyperparams v = apply_variant(Variant::kItr, h, 60);
    CHECK(v.k1 == h.k1);
    CHECK(v.sigma_star_fixed == 0.0);
    CHECK_FALSE(v.pin_assignments);
  }

  SUBCASE("pop collapses to one component") {
    const Hyperparams v = apply_variant(Variant::kPop, h, 60);
    CHECK(v.k1 == 1);
    CHECK(v.k2 == std::vector<int>{1, 1});
    CHECK(v.sigma_star_fixed == 1e-6);
    CHECK(v.var_resp_within[0] == 1e-6);
    // Stick weights degenerate.
    CHECK(stick_weights(Vec::Constant(1, 1.0)).size() == 1);
  }

  SUBCASE("individual pins one component per unit") {
    const Hyperparams v = apply_variant(Variant::kIndividual, h, 17);
    CHECK(v.k1 == 17);
    CHECK(v.pin_assignments);
  }

  SUBCASE("subpop keeps truncation but collapses spreads") {
    const Hyperparams v = apply_variant(Variant::kSubpop, h, 60);
    CHECK(v.k1 == h.k1);
    CHECK(v.var_sigma_u_within == 1e-6);
    CHECK(v.sigma_star_fixed == 1e-6);
  }

  SUBCASE("subpop members stay within 1e-2 of their cluster on a toy fit") {
    SimConfig sc = SimConfig::defaults();
    sc.n_trajectories = 6;
    sc.duration_min_hours = 2.0;
    sc.duration_max_hours = 2.5;
    sc.seed = 3;
    const Cohort cohort = simulate_cohort(sc).first;
    Hyperparams hv = apply_variant(Variant::kSubpop,
                                   Hyperparams::defaults(3, 2), cohort.n_indiv());
    hv.k1 = 3;
    hv.k2 = {3, 3};
    SamplerConfig cfg;
    cfg.iterations = 30;
    cfg.burn_in = 29;
    cfg.seed = 21;
    cfg.progress_every = 0;
    const PosteriorTrace tr = GibbsSampler(cohort, hv, cfg).run();
    const ParamState& s = tr.draws.back();
    for (int i = 0; i < cohort.n_indiv(); ++i) {
      const auto& comp = s.base_comps[s.base_mix.assignments[i]];
      CHECK((s.baseline[i].beta - comp.beta_star).cwiseAbs().maxCoeff() < 1e-2);
    }
  }
}

TEST_CASE("curve band extraction") {
  Cohort cohort = linear_cohort(1, 5, (Vec(2) << 1.0, 2.0).finished());
  cohort.trajectories[0].treatments = {{25.0, 1}};
  const Vec grid = (Vec(4) << 0.0, 5.0, 15.0, 40.0).finished();

  ParamState d1 = draw_for(cohort, (Vec(2) << 1.0, 2.0).finished(), 0.1, 0.5, 0.05);
  ParamState d2 = d1;
  d2.response[0][0] = make_response_from_ratio(4.0, 0.6, 0.5, 12.0, 0.4);

  SUBCASE("single draw collapses the band") {
    PosteriorTrace tr;
    tr.draws = {d1};
    const CurveBand band = extract_curves({tr}, 0, 0, grid, false, cohort);
    CHECK(band.mean[0] == 0.0);  // g(0) = 0 in every draw
    for (int j = 0; j < grid.size(); ++j) {
      CHECK(band.lo[j] == band.mean[j]);
      CHECK(band.hi[j] == band.mean[j]);
    }
  }

  SUBCASE("band quantiles match direct quantiles of the draw matrix") {
    PosteriorTrace tr;
    tr.draws = {d1, d2};
    const CurveBand band = extract_curves({tr}, 0, 0, grid, false, cohort);
    for (int j = 0; j < grid.size(); ++j) {
      const double a = eval_response_curve(d1.response[0][0], grid[j]);
      const double b = eval_response_curve(d2.response[0][0], grid[j]);
      CHECK(band.mean[j] == doctest::Approx(0.5 * (a + b)).epsilon(1e-12));
      CHECK(band.lo[j] == doctest::Approx(quantile({a, b}, 0.025)).epsilon(1e-12));
      CHECK(band.hi[j] == doctest::Approx(quantile({a, b}, 0.975)).epsilon(1e-12));
    }
  }

  SUBCASE("normalization divides by the outcome at initiation") {
    PosteriorTrace tr;
    tr.draws = {d1};
    const CurveBand raw = extract_curves({tr}, 0, 0, grid, false, cohort);
    const CurveBand norm = extract_curves({tr}, 0, 0, grid, true, cohort);
    // Latest observation at or before the first type-1 event (t = 25): j = 1.
    const double scale = cohort.trajectories[0].outcomes[1];
    for (int j = 0; j < grid.size(); ++j) {
      CHECK(norm.mean[j] == doctest::Approx(raw.mean[j] / scale).epsilon(1e-12));
    }
  }
}

TEST_CASE("quantile definition") {
  std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("cohort truncation keeps leading observations and their events") {
  SimConfig sc = SimConfig::defaults();
  sc.n_trajectories = 3;
  sc.seed = 5;
  const Cohort full = simulate_cohort(sc).first;
  const Cohort train = truncate_cohort(full, 50);
  for (int i = 0; i < 3; ++i) {
    CHECK(train.trajectories[i].n_obs() == 50);
    const double end = train.trajectories[i].times[49];
    for (const auto& ev : train.trajectories[i].treatments) CHECK(ev.time <= end);
    // No later event sneaks in.
    size_t expected = 0;
    for (const auto& ev : full.trajectories[i].treatments) {
      if (ev.time <= end) ++expected;
    }
    CHECK(train.trajectories[i].treatments.size() == expected);
  }
}
