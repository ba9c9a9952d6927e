#include "itr/config.hpp"

#include <cmath>

#include "itr/curves.hpp"
#include <fstream>
#include <sstream>

namespace itr {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
    }
    cfg.entries_[key] = value;
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

void Config::set(const std::string& key, double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  entries_[key] = out.str();
}

void Config::set(const std::string& key, int value) { entries_[key] = std::to_string(value); }

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  size_t pos = 0;
  const double v = std::stod(it->second, &pos);
  if (pos != it->second.size()) throw std::runtime_error("config: bad number for " + key);
  return v;
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  return std::stoi(it->second);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  return std::stoull(it->second);
}

std::vector<double> Config::get_vector(const std::string& key,
                                       const std::vector<double>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  std::istringstream in(it->second);
  std::string token;
  while (std::getline(in, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    out.push_back(std::stod(token));
  }
  if (out.empty()) throw std::runtime_error("config: empty vector for " + key);
  return out;
}

std::string Config::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
  return out.str();
}

Hyperparams hyperparams_from_config(const Config& cfg, int p, int n_types) {
  Hyperparams h = Hyperparams::defaults(p, n_types);
  h.k1 = cfg.get_int("hyper.k1", h.k1);
  {
    const int k2_all = cfg.get_int("hyper.k2", 0);
    if (k2_all > 0) h.k2.assign(n_types, k2_all);
  }
  const auto beta0 = cfg.get_vector("hyper.beta0", {});
  if (!beta0.empty()) {
    if (static_cast<int>(beta0.size()) != p) {
      throw std::runtime_error("config: hyper.beta0 must have p entries");
    }
    h.beta0 = Eigen::Map<const Vec>(beta0.data(), p);
  }
  h.kappa0 = cfg.get_double("hyper.kappa0", h.kappa0);
  h.nu0 = cfg.get_double("hyper.nu0", h.nu0);
  h.s0 = cfg.get_double("hyper.s0_diag", 1.0) * Mat::Identity(p, p);
  h.mu_sigma_u_base = cfg.get_double("hyper.mu_sigma_u_base", h.mu_sigma_u_base);
  h.var_sigma_u_base = cfg.get_double("hyper.var_sigma_u_base", h.var_sigma_u_base);
  h.mu_rho_u_base = cfg.get_double("hyper.mu_rho_u_base", h.mu_rho_u_base);
  h.var_rho_u_base = cfg.get_double("hyper.var_rho_u_base", h.var_rho_u_base);
  h.var_sigma_u_within = cfg.get_double("hyper.var_sigma_u_within", h.var_sigma_u_within);
  h.var_rho_u_within = cfg.get_double("hyper.var_rho_u_within", h.var_rho_u_within);
  for (int d = 0; d < n_types; ++d) {
    const std::string suffix = "." + std::to_string(d + 1);
    const auto mu = cfg.get_vector("hyper.mu_resp_base" + suffix, {});
    if (!mu.empty()) {
      if (mu.size() != 5) throw std::runtime_error("config: mu_resp_base needs 5 entries");
      h.mu_resp_base[d] = Eigen::Map<const Vec5>(mu.data());
    }
    const auto var = cfg.get_vector("hyper.var_resp_base" + suffix, {});
    if (!var.empty()) {
      if (var.size() != 5) throw std::runtime_error("config: var_resp_base needs 5 entries");
      h.var_resp_base[d] = Eigen::Map<const Vec5>(var.data());
    }
    h.c2[d] = cfg.get_double("hyper.c2" + suffix, h.c2[d]);
    h.d2[d] = cfg.get_double("hyper.d2" + suffix, h.d2[d]);
  }
  const auto within = cfg.get_vector("hyper.var_resp_within", {});
  if (!within.empty()) {
    if (within.size() == 1) {
      h.var_resp_within = Vec5::Constant(within[0]);
    } else if (within.size() == 5) {
      h.var_resp_within = Eigen::Map<const Vec5>(within.data());
    } else {
      throw std::runtime_error("config: var_resp_within needs 1 or 5 entries");
    }
  }
  h.s_eps = cfg.get_double("hyper.s_eps", h.s_eps);
  h.nu_eps = cfg.get_double("hyper.nu_eps", h.nu_eps);
  h.mu_eps1 = cfg.get_double("hyper.mu_eps1", h.mu_eps1);
  h.var_eps1 = cfg.get_double("hyper.var_eps1", h.var_eps1);
  h.mu_eps2 = cfg.get_double("hyper.mu_eps2", h.mu_eps2);
  h.var_eps2 = cfg.get_double("hyper.var_eps2", h.var_eps2);
  h.c1 = cfg.get_double("hyper.c1", h.c1);
  h.d1 = cfg.get_double("hyper.d1", h.d1);
  h.noise_window_minutes = cfg.get_double("model.noise_window_minutes", 0.0);
  return h;
}

SamplerConfig sampler_from_config(const Config& cfg) {
  SamplerConfig s;
  s.iterations = cfg.get_int("sampler.iterations", s.iterations);
  s.burn_in = cfg.get_int("sampler.burn_in", s.burn_in);
  s.thin = cfg.get_int("sampler.thin", s.thin);
  s.chains = cfg.get_int("sampler.chains", s.chains);
  s.scale_real = cfg.get_double("sampler.scale_real", s.scale_real);
  s.scale_unit = cfg.get_double("sampler.scale_unit", s.scale_unit);
  s.seed = cfg.get_u64("sampler.seed", s.seed);
  s.fixed_gp_scale = cfg.get_double("sampler.fixed_gp_scale", s.fixed_gp_scale);
  s.progress_every = cfg.get_int("sampler.progress_every", s.progress_every);
  return s;
}

SimConfig sim_from_config(const Config& cfg) {
  SimConfig s = SimConfig::defaults();
  s.n_trajectories = cfg.get_int("sim.n", s.n_trajectories);
  s.duration_min_hours = cfg.get_double("sim.duration_min_hours", s.duration_min_hours);
  s.duration_max_hours = cfg.get_double("sim.duration_max_hours", s.duration_max_hours);
  s.obs_gap_min = cfg.get_double("sim.obs_gap_min", s.obs_gap_min);
  s.obs_gap_max = cfg.get_double("sim.obs_gap_max", s.obs_gap_max);
  s.treat_gap_min = cfg.get_double("sim.treat_gap_min", s.treat_gap_min);
  s.treat_gap_max = cfg.get_double("sim.treat_gap_max", s.treat_gap_max);
  s.normal_low = cfg.get_double("sim.normal_low", s.normal_low);
  s.normal_high = cfg.get_double("sim.normal_high", s.normal_high);
  s.covariate_time_unit_minutes =
      cfg.get_double("sim.covariate_time_unit_minutes", s.covariate_time_unit_minutes);
  s.sigma_eps = cfg.get_double("sim.sigma_eps", s.sigma_eps);
  s.sigma_eps_prime_sq = cfg.get_double("sim.sigma_eps_prime_sq", s.sigma_eps_prime_sq);
  s.rho_eps_prime = cfg.get_double("sim.rho_eps_prime", s.rho_eps_prime);
  s.baseline_spread_sd = cfg.get_double("sim.baseline_spread_sd", s.baseline_spread_sd);
  s.resp_spread_sd = cfg.get_double("sim.resp_spread_sd", s.resp_spread_sd);
  s.sigma_u_sq_truth = cfg.get_double("sim.sigma_u_sq_truth", s.sigma_u_sq_truth);
  s.seed = cfg.get_u64("sim.seed", s.seed);
  for (int c = 0; c < 3; ++c) {
    const std::string sc = std::to_string(c + 1);
    const auto beta = cfg.get_vector("sim.beta_truth." + sc, {});
    if (!beta.empty()) {
      if (beta.size() != 3) throw std::runtime_error("config: sim.beta_truth needs 3 entries");
      s.beta_truth[c] = Eigen::Map<const Vec>(beta.data(), 3);
    }
    s.rho_u_truth[c] = cfg.get_double("sim.rho_u_truth." + sc, s.rho_u_truth[c]);
    for (int d = 0; d < 2; ++d) {
      const auto r =
          cfg.get_vector("sim.resp_truth." + std::to_string(d + 1) + "." + sc, {});
      if (!r.empty()) {
        if (r.size() != 5) throw std::runtime_error("config: sim.resp_truth needs 5 entries");
        s.resp_truth[d][c] = make_response_from_raw(r[0], r[1], r[2], r[3], r[4]);
      }
    }
  }
  return s;
}

}  // namespace itr
