#include <doctest.h>

#include <cmath>
#include <random>

#include "itr/curves.hpp"
#include "itr/kernels.hpp"
#include "itr/likelihood.hpp"
#include "itr/mvn.hpp"

using namespace itr;

namespace {

// Brute-force multivariate normal log density via explicit inverse and
// determinant; independent of the Cholesky path under test.
double dense_mvn_logpdf(const Vec& r, const Mat& cov) {
  const Mat inv = cov.inverse();
  const double det = cov.determinant();
  return -0.5 * (r.size() * std::log(2.0 * M_PI) + std::log(det) +
                 (r.transpose() * inv * r)(0, 0));
}

Trajectory toy_trajectory() {
  Trajectory t;
  t.id = "toy";
  t.times = (Vec(3) << 10.0, 25.0, 50.0).finished();
  t.outcomes = (Vec(3) << 8.1, 9.4, 12.0).finished();
  t.covariates.resize(3, 2);
  t.covariates << 1, 0.1, 1, 0.25, 1, 0.5;
  t.treatments = {{15.0, 1}, {30.0, 2}};
  return t;
}

}  // namespace

TEST_CASE("single observation, standard normal at the mode") {
  Trajectory t;
  t.id = "one";
  t.times = Vec::Constant(1, 5.0);
  t.outcomes = Vec::Constant(1, 3.0);
  t.covariates = Mat::Ones(1, 1);
  BaselineParams base{Vec::Constant(1, 3.0), 1.0, 0.5};
  RandomEffect u{Vec::Zero(1)};
  NoiseParams noise{{1.0}, {}, {}};
  const double ll = outcome_loglik(t, base, u, {}, noise, 0);
  CHECK(ll == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-9));
}

TEST_CASE("no treatments reduces to iid residual density") {
  Trajectory t = toy_trajectory();
  t.treatments.clear();
  BaselineParams base{(Vec(2) << 8.0, 4.0).finished(), 0.01, 0.5};
  RandomEffect u{(Vec(3) << 0.05, -0.1, 0.02).finished()};
  NoiseParams noise{{0.25}, {}, {}};
  const Vec r = t.outcomes - t.covariates * base.beta - u.u;
  double direct = 0.0;
  for (int j = 0; j < 3; ++j) direct += normal_logpdf(r[j], 0.0, 0.25);
  CHECK(outcome_loglik(t, base, u, {}, noise, 0) == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("matches an independently coded dense evaluation") {
  const Trajectory t = toy_trajectory();
  BaselineParams base{(Vec(2) << 8.0, 4.0).finished(), 0.01, 0.5};
  RandomEffect u{(Vec(3) << 0.05, -0.1, 0.02).finished()};
  const std::vector<ResponseParams> resp{make_response_from_raw(5.0, 0.6, 0.4, 12.0, 0.0),
                                         make_response_from_raw(-4.0, 0.5, 0.5, 15.0, 0.0)};
  NoiseParams noise{{0.09}, {0.01, 0.02}, {0.9, 0.8}};

  const Vec f = cumulative_response(resp, t.treatments, t.times);
  const Vec r = t.outcomes - t.covariates * base.beta - u.u - f;
  const Mat cov = noise_covariance(noise, 0, t.times, t.treatments);
  CHECK(outcome_loglik(t, base, u, resp, noise, 0) ==
        doctest::Approx(dense_mvn_logpdf(r, cov)).epsilon(1e-8));
}

TEST_CASE("brute-force agreement on random small instances") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int j = 1 + static_cast<int>(unif(gen) * 5.0);
    Trajectory t;
    t.id = "r";
    t.times.resize(j);
    double time = 0.0;
    for (int m = 0; m < j; ++m) {
      time += 2.0 + 10.0 * unif(gen);
      t.times[m] = time;
    }
    t.covariates = Mat::Ones(j, 1);
    t.outcomes.resize(j);
    for (int m = 0; m < j; ++m) t.outcomes[m] = 5.0 * unif(gen);
    if (unif(gen) < 0.7) t.treatments.push_back({1.0 + 20.0 * unif(gen), 1});
    if (unif(gen) < 0.5) t.treatments.push_back({30.0 + 20.0 * unif(gen), 2});
    std::sort(t.treatments.begin(), t.treatments.end(),
              [](auto a, auto b) { return a.time < b.time; });

    BaselineParams base{Vec::Constant(1, 2.0 * unif(gen)), 0.05, 0.5};
    RandomEffect u{Vec::Zero(j)};
    for (int m = 0; m < j; ++m) u.u[m] = unif(gen) - 0.5;
    const std::vector<ResponseParams> resp{
        make_response_from_ratio(3.0, 0.4, 0.5, 10.0, 0.3),
        make_response_from_ratio(-2.0, 0.6, 0.3, 8.0, 0.2)};
    NoiseParams noise{{0.04 + 0.2 * unif(gen)}, {0.01, 0.02}, {0.7, 0.9}};

    const Vec f = cumulative_response(resp, t.treatments, t.times);
    const Vec r = t.outcomes - t.covariates * base.beta - u.u - f;
    const Mat cov = noise_covariance(noise, 0, t.times, t.treatments);
    CHECK(outcome_loglik(t, base, u, resp, noise, 0) ==
          doctest::Approx(dense_mvn_logpdf(r, cov)).epsilon(1e-8));
  }
}

TEST_CASE("dimension mismatches raise") {
  const Trajectory t = toy_trajectory();
  BaselineParams base{(Vec(3) << 1.0, 1.0, 1.0).finished(), 0.01, 0.5};
  RandomEffect u{Vec::Zero(3)};
  NoiseParams noise{{0.09}, {0.01, 0.01}, {0.9, 0.9}};
  CHECK_THROWS_AS(outcome_loglik(t, base, u, {}, noise, 0), std::invalid_argument);
}

TEST_CASE("cholesky jitter and failure") {
  Mat good(2, 2);
  good << 1.0, 0.999999, 0.999999, 1.0;
  CHECK_NOTHROW(chol_spd(good));
  Mat bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_AS(chol_spd(bad), NumericalError);
}
