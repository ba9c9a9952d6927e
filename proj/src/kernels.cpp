#include "itr/kernels.hpp"

#include <cmath>

namespace itr {

Mat exp_kernel(double sigma_sq, double rho, const Vec& times) {
  if (!(sigma_sq > 0.0)) throw std::invalid_argument("exp_kernel: sigma_sq must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("exp_kernel: rho outside (0,1)");
  const int n = static_cast<int>(times.size());
  const Mat dt = (times.replicate(1, n) - times.transpose().replicate(n, 1)).cwiseAbs();
  return sigma_sq * (std::log(rho) * dt.array()).exp().matrix();
}

Mat treatment_noise_kernel(std::span<const double> sigma_prime_sq,
                           std::span<const double> rho_prime, const Vec& times,
                           std::span<const TreatmentEvent> events, double window_minutes) {
  const int n = static_cast<int>(times.size());
  Mat k = Mat::Zero(n, n);
  for (const auto& ev : events) {
    const int d = ev.kind - 1;
    if (d < 0 || d >= static_cast<int>(sigma_prime_sq.size()) ||
        d >= static_cast<int>(rho_prime.size())) {
      throw std::invalid_argument("treatment_noise_kernel: event kind without noise parameters");
    }
    const double s2 = sigma_prime_sq[d];
    const double log_rho = std::log(rho_prime[d]);
    for (int j = 0; j < n; ++j) {
      const double ej = times[j] - ev.time;
      if (!(ej > 0.0)) continue;
      if (window_minutes > 0.0 && ej > window_minutes) continue;
      for (int l = 0; l <= j; ++l) {
        const double el = times[l] - ev.time;
        if (!(el > 0.0)) continue;
        if (window_minutes > 0.0 && el > window_minutes) continue;
        const double v = s2 * std::exp(log_rho * std::abs(times[j] - times[l]));
        k(j, l) += v;
        if (l != j) k(l, j) += v;
      }
    }
  }
  return k;
}

Mat noise_covariance(const NoiseParams& noise, int i, const Vec& times,
                     std::span<const TreatmentEvent> events, double window_minutes) {
  noise.validate();
  if (i < 0 || i >= static_cast<int>(noise.sigma_eps_sq.size())) {
    throw std::invalid_argument("noise_covariance: individual index out of range");
  }
  Mat k = treatment_noise_kernel(noise.sigma_eps_prime_sq, noise.rho_eps_prime, times, events,
                                 window_minutes);
  k.diagonal().array() += noise.sigma_eps_sq[i];
  return k;
}

}  // namespace itr
