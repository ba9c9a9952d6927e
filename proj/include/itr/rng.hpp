#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace itr {

/// Deterministic random stream. One instance per chain / per trajectory;
/// streams derived from the same seed with distinct ids are independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Derives an independent stream from (seed, id) via splitmix64.
  static Rng stream(std::uint64_t seed, std::uint64_t id) {
    std::uint64_t x = seed + (id + 1) * 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    x ^= x >> 31;
    return Rng(x);
  }

  double uniform() { return unif_(gen_); }
  double normal() { return norm_(gen_); }
  double normal(double mean, double sd) { return mean + sd * norm_(gen_); }

  double gamma(double shape, double scale) {
    std::gamma_distribution<double> g(shape, scale);
    return g(gen_);
  }

  double beta(double a, double b) {
    // Resample the measure-zero boundary hits; downstream stick-breaking
    // takes log(1 - V).
    for (;;) {
      const double x = gamma(a, 1.0);
      const double y = gamma(b, 1.0);
      const double v = x / (x + y);
      if (v > 0.0 && v < 1.0) return v;
    }
  }

  double chi_squared(double df) { return gamma(0.5 * df, 2.0); }

  /// Inverse gamma with shape a and rate b (density ~ x^{-a-1} exp(-b/x)).
  double inverse_gamma(double shape, double rate) {
    return rate / gamma(shape, 1.0);
  }

  /// Normal proposal truncated to (0, inf); caller guarantees mean > 0 so the
  /// rejection loop terminates quickly (acceptance >= 1/2).
  double truncated_normal_positive(double mean, double sd) {
    for (;;) {
      const double y = normal(mean, sd);
      if (y > 0.0) return y;
    }
  }

  /// Normal proposal reflected at 0 and 1 (possibly multiple times) back into
  /// (0,1). The fold is the closed form of repeated reflection.
  double reflected_normal_unit(double mean, double sd) {
    for (;;) {
      double z = std::fmod(normal(mean, sd), 2.0);
      if (z < 0.0) z += 2.0;
      const double y = z <= 1.0 ? z : 2.0 - z;
      if (y > 0.0 && y < 1.0) return y;
    }
  }

  /// Samples an index from unnormalized log weights.
  int categorical_from_log(const Eigen::VectorXd& log_w) {
    const double m = log_w.maxCoeff();
    Eigen::VectorXd w = (log_w.array() - m).exp();
    const double u = uniform() * w.sum();
    double c = 0.0;
    for (int k = 0; k < w.size(); ++k) {
      c += w[k];
      if (u <= c) return k;
    }
    return static_cast<int>(w.size()) - 1;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> norm_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace itr
