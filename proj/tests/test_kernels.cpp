#include <doctest.h>

#include <cmath>

#include "itr/kernels.hpp"

using namespace itr;

TEST_CASE("exponential kernel") {
  Vec t(3);
  t << 0.0, 1.0, 3.0;
  const Mat k = exp_kernel(0.01, 0.9, t);
  for (int j = 0; j < 3; ++j) CHECK(k(j, j) == 0.01);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      CHECK(k(a, b) ==
            doctest::Approx(0.01 * std::pow(0.9, std::abs(t[a] - t[b]))).epsilon(1e-14));
    }
  }
  Vec t2(2);
  t2 << 0.0, 1.0;
  CHECK(exp_kernel(1.0, 0.5, t2)(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(exp_kernel(-1.0, 0.5, t), std::invalid_argument);
  CHECK_THROWS_AS(exp_kernel(1.0, 1.0, t), std::invalid_argument);
}

TEST_CASE("noise covariance") {
  NoiseParams noise;
  noise.sigma_eps_sq = {0.25};
  noise.sigma_eps_prime_sq = {0.04, 0.01};
  noise.rho_eps_prime = {0.8, 0.9};
  Vec t(3);
  t << 10.0, 20.0, 40.0;

  SUBCASE("no treatments: iid diagonal") {
    const Mat k = noise_covariance(noise, 0, t, {});
    CHECK(k.isApprox(0.25 * Mat::Identity(3, 3)));
  }

  SUBCASE("single event before both times") {
    const std::vector<TreatmentEvent> ev{{5.0, 2}};
    const Mat k = noise_covariance(noise, 0, t, ev);
    CHECK(k(0, 0) == doctest::Approx(0.25 + 0.01).epsilon(1e-14));
    CHECK(k(0, 1) == doctest::Approx(0.01 * std::pow(0.9, 10.0)).epsilon(1e-12));
  }

  SUBCASE("events contribute only to pairs they precede") {
    const std::vector<TreatmentEvent> ev{{15.0, 1}};
    const Mat k = noise_covariance(noise, 0, t, ev);
    CHECK(k(0, 0) == 0.25);            // event after t0
    CHECK(k(0, 1) == 0.0);             // pair needs the event before both
    CHECK(k(1, 2) == doctest::Approx(0.04 * std::pow(0.8, 20.0)).epsilon(1e-12));
  }

  SUBCASE("repeated events of one type double the term") {
    const std::vector<TreatmentEvent> one{{5.0, 1}};
    const std::vector<TreatmentEvent> two{{3.0, 1}, {5.0, 1}};
    const Mat k1 = noise_covariance(noise, 0, t, one);
    const Mat k2 = noise_covariance(noise, 0, t, two);
    CHECK(k2(0, 1) == doctest::Approx(2.0 * k1(0, 1)).epsilon(1e-12));
    // Brute-force sum over events.
    double direct = 0.0;
    for (const auto& e : two) {
      if (e.time < t[0] && e.time < t[1]) direct += 0.04 * std::pow(0.8, t[1] - t[0]);
    }
    CHECK(k2(0, 1) == doctest::Approx(direct).epsilon(1e-12));
  }

  SUBCASE("window flag zeroes stale terms") {
    const std::vector<TreatmentEvent> ev{{5.0, 1}};
    const Mat k = noise_covariance(noise, 0, t, ev, 10.0);
    CHECK(k(0, 0) == doctest::Approx(0.25 + 0.04).epsilon(1e-14));  // elapsed 5 <= 10
    CHECK(k(1, 1) == 0.25);                                         // elapsed 15 > 10
    CHECK(k(0, 1) == 0.0);
  }
}

TEST_CASE("kernel symmetry and eigenvalue floor") {
  NoiseParams noise;
  noise.sigma_eps_sq = {0.09};
  noise.sigma_eps_prime_sq = {0.01, 0.01};
  noise.rho_eps_prime = {0.9, 0.5};
  Vec t(8);
  t << 0, 7, 13, 26, 28, 41, 55, 70;
  const std::vector<TreatmentEvent> ev{{3.0, 1}, {20.0, 2}, {30.0, 1}, {50.0, 2}};

  for (const Mat& k :
       {exp_kernel(0.5, 0.85, t), noise_covariance(noise, 0, t, ev),
        treatment_noise_kernel(noise.sigma_eps_prime_sq, noise.rho_eps_prime, t, ev)}) {
    CHECK(k.isApprox(k.transpose(), 1e-12));
    const Eigen::SelfAdjointEigenSolver<Mat> eig(k);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * k.trace());
  }
}
