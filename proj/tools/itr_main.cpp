#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "itr/config.hpp"
#include "itr/io.hpp"

namespace {

using namespace itr;

double unit_to_minutes(const std::string& unit) {
  if (unit == "minutes") return 1.0;
  if (unit == "hours") return 60.0;
  if (unit == "days") return 1440.0;
  throw std::runtime_error("unknown time unit '" + unit + "' (minutes|hours|days)");
}

std::string default_out_dir() {
  const char* env = std::getenv("ITR_OUT_DIR");
  return env != nullptr ? env : ".";
}

Config load_config(const std::string& path) {
  return path.empty() ? Config() : Config::from_file(path);
}

// CLI flags override file values; 0/empty sentinel = not given.
struct FitArgs {
  std::string data_dir, out_dir = default_out_dir(), config_path, variant = "itr";
  std::string unit = "minutes";
  int chains = 0, iters = 0, burn_in = -1, thin = 0, k1 = 0, k2 = 0, cutoff = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double fixed_gp_scale = -1.0;
};

int cmd_fit(const FitArgs& args) {
  Config cfg = load_config(args.config_path);
  if (args.chains > 0) cfg.set("sampler.chains", args.chains);
  if (args.iters > 0) cfg.set("sampler.iterations", args.iters);
  if (args.burn_in >= 0) cfg.set("sampler.burn_in", args.burn_in);
  if (args.thin > 0) cfg.set("sampler.thin", args.thin);
  if (args.seed_given) cfg.set("sampler.seed", std::to_string(args.seed));
  if (args.k1 > 0) cfg.set("hyper.k1", args.k1);
  if (args.k2 > 0) cfg.set("hyper.k2", args.k2);
  if (args.fixed_gp_scale >= 0.0) cfg.set("sampler.fixed_gp_scale", args.fixed_gp_scale);
  cfg.set("fit.variant", args.variant);
  cfg.set("fit.unit", args.unit);
  if (args.cutoff > 0) cfg.set("fit.train_cutoff", args.cutoff);

  Cohort cohort = read_cohort(args.data_dir, unit_to_minutes(args.unit));
  if (args.cutoff > 0) cohort = truncate_cohort(cohort, args.cutoff);
  const int n_types = std::max(cohort.n_types, cfg.get_int("model.n_types", 1));
  cohort.n_types = n_types;
  const int p = cohort.trajectories.front().n_cov();

  Hyperparams h = hyperparams_from_config(cfg, p, n_types);
  h = apply_variant(parse_variant(args.variant), h, cohort.n_indiv());
  const SamplerConfig sampler_cfg = sampler_from_config(cfg);

  std::vector<int> obs_counts;
  for (const auto& t : cohort.trajectories) obs_counts.push_back(t.n_obs());

  const auto traces = run_chains(cohort, h, sampler_cfg);
  std::filesystem::create_directories(args.out_dir);
  for (const auto& trace : traces) {
    write_trace(args.out_dir + "/trace_chain" + std::to_string(trace.chain_index) + ".bin",
                trace, h, obs_counts, cfg.serialize());
    std::cout << "chain " << trace.chain_index << ": " << trace.draws.size()
              << " draws, accept gp=" << trace.accept.gp.rate()
              << " noise=" << trace.accept.noise.rate();
    for (int d = 0; d < n_types; ++d) {
      std::cout << " resp" << (d + 1) << "=" << trace.accept.response[d].rate();
    }
    std::cout << ", " << trace.elapsed_seconds << "s\n";
  }
  return 0;
}

std::vector<TraceFile> load_traces(const std::string& fit_dir) {
  std::vector<TraceFile> out;
  for (int c = 0;; ++c) {
    const std::string path = fit_dir + "/trace_chain" + std::to_string(c) + ".bin";
    if (!std::filesystem::exists(path)) break;
    out.push_back(read_trace(path));
  }
  if (out.empty()) throw std::runtime_error("no trace files under " + fit_dir);
  return out;
}

int cmd_predict(const std::string& data_dir, const std::string& fit_dir,
                const std::string& out_dir, int cutoff, const std::string& unit,
                std::uint64_t seed) {
  const Cohort cohort = read_cohort(data_dir, unit_to_minutes(unit));
  const auto traces = load_traces(fit_dir);
  const Config echo = Config::from_string(traces.front().config_echo);
  const Hyperparams h = hyperparams_from_config(
      echo, traces.front().dims.p, traces.front().dims.n_types);

  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/predictions.csv");
  out << "# itr-tables 1\ntrajectory_id,time,observed,mean,lo,hi\n";
  out.precision(17);
  Rng rng(seed);
  for (int i = 0; i < cohort.n_indiv(); ++i) {
    const auto& traj = cohort.trajectories[i];
    if (traj.n_obs() <= cutoff) continue;
    const auto req = ForecastRequest::held_out(traj, cutoff);
    std::vector<std::vector<double>> per_time(req.future_times.size());
    Vec mean = Vec::Zero(req.future_times.size());
    std::size_t n_draws = 0;
    for (const auto& tf : traces) {
      for (const auto& draw : tf.trace.draws) {
        const Forecast fc = posterior_predict(draw, i, traj, req, h, rng);
        mean += fc.mean;
        for (int j = 0; j < fc.mean.size(); ++j) per_time[j].push_back(fc.mean[j]);
        ++n_draws;
      }
    }
    mean /= static_cast<double>(n_draws);
    for (int j = 0; j < req.future_times.size(); ++j) {
      out << traj.id << "," << req.future_times[j] << "," << traj.outcomes[cutoff + j] << ","
          << mean[j] << "," << quantile(per_time[j], 0.025) << ","
          << quantile(per_time[j], 0.975) << "\n";
    }
  }
  std::cout << "wrote " << out_dir << "/predictions.csv\n";
  return 0;
}

int cmd_evaluate(const std::string& data_dir, const std::string& fit_dir,
                 const std::string& out_dir, int cutoff, double bucket_minutes,
                 const std::string& unit) {
  const Cohort cohort = read_cohort(data_dir, unit_to_minutes(unit));
  const auto trace_files = load_traces(fit_dir);
  const Config echo = Config::from_string(trace_files.front().config_echo);
  const Hyperparams h = hyperparams_from_config(
      echo, trace_files.front().dims.p, trace_files.front().dims.n_types);
  std::vector<PosteriorTrace> traces;
  for (auto& tf : trace_files) traces.push_back(std::move(tf.trace));
  const RmseReport report = evaluate_rmse(traces, cohort, cutoff, bucket_minutes, h);
  std::filesystem::create_directories(out_dir);
  write_rmse_report(out_dir + "/rmse.csv", report);
  std::cout << "overall held-out RMSE " << report.overall.rmse << " [" << report.overall.ci_lo
            << ", " << report.overall.ci_hi << "] over " << report.overall.n_obs
            << " observations\n";
  return 0;
}

int cmd_diagnose(const std::string& fit_dir, const std::string& out_dir) {
  const auto traces = load_traces(fit_dir);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/acceptance.csv");
    out << "# itr-tables 1\nchain,block,proposed,accepted,rate\n";
    for (const auto& tf : traces) {
      const auto& a = tf.trace.accept;
      out << tf.trace.chain_index << ",gp," << a.gp.proposed << "," << a.gp.accepted << ","
          << a.gp.rate() << "\n";
      out << tf.trace.chain_index << ",noise," << a.noise.proposed << "," << a.noise.accepted
          << "," << a.noise.rate() << "\n";
      for (size_t d = 0; d < a.response.size(); ++d) {
        out << tf.trace.chain_index << ",response" << (d + 1) << ","
            << a.response[d].proposed << "," << a.response[d].accepted << ","
            << a.response[d].rate() << "\n";
      }
    }
  }
  {
    std::ofstream out(out_dir + "/parameters.csv");
    out << "# itr-tables 1\nchain,parameter,mean,sd,q025,q975\n";
    out.precision(10);
    for (const auto& tf : traces) {
      const auto& draws = tf.trace.draws;
      auto summary = [&](const std::string& name, auto&& extract) {
        std::vector<double> v;
        v.reserve(draws.size());
        for (const auto& s : draws) v.push_back(extract(s));
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= v.size();
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
        out << tf.trace.chain_index << "," << name << "," << mean << "," << std::sqrt(var)
            << "," << quantile(v, 0.025) << "," << quantile(v, 0.975) << "\n";
      };
      if (draws.empty()) continue;
      const int n = static_cast<int>(draws.front().baseline.size());
      const int n_types = static_cast<int>(draws.front().resp_mix.size());
      summary("m1", [](const ParamState& s) { return s.base_mix.concentration; });
      for (int d = 0; d < n_types; ++d) {
        summary("m2." + std::to_string(d + 1),
                [d](const ParamState& s) { return s.resp_mix[d].concentration; });
        summary("sigma_eps_prime_sq." + std::to_string(d + 1),
                [d](const ParamState& s) { return s.noise.sigma_eps_prime_sq[d]; });
        summary("rho_eps_prime." + std::to_string(d + 1),
                [d](const ParamState& s) { return s.noise.rho_eps_prime[d]; });
        summary("mean_alpha1." + std::to_string(d + 1), [d, n](const ParamState& s) {
          double v = 0.0;
          for (int i = 0; i < n; ++i) v += s.response[i][d].alpha1;
          return v / n;
        });
      }
      summary("mean_sigma_eps_sq", [n](const ParamState& s) {
        double v = 0.0;
        for (int i = 0; i < n; ++i) v += s.noise.sigma_eps_sq[i];
        return v / n;
      });
      const int p = static_cast<int>(draws.front().baseline.front().beta.size());
      for (int c = 0; c < p; ++c) {
        summary("mean_beta." + std::to_string(c), [c, n](const ParamState& s) {
          double v = 0.0;
          for (int i = 0; i < n; ++i) v += s.baseline[i].beta[c];
          return v / n;
        });
      }
    }
  }
  std::cout << "wrote " << out_dir << "/acceptance.csv and parameters.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Individualized treatment-response curves: simulate, fit, forecast"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic cohort with ground truth");
  std::string sim_out = default_out_dir(), sim_config;
  std::uint64_t sim_seed = 0;
  bool sim_seed_given = false;
  int sim_n = 0;
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--config", sim_config, "config file");
  sim->add_option("--seed", sim_seed)->each([&](const std::string&) { sim_seed_given = true; });
  sim->add_option("--n", sim_n, "number of trajectories");

  // fit
  auto* fit = app.add_subcommand("fit", "run the blocked Gibbs / MH sampler");
  FitArgs fa;
  fit->add_option("--data", fa.data_dir)->required();
  fit->add_option("--out", fa.out_dir);
  fit->add_option("--config", fa.config_path);
  fit->add_option("--chains", fa.chains);
  fit->add_option("--iters", fa.iters);
  fit->add_option("--burn-in", fa.burn_in);
  fit->add_option("--thin", fa.thin);
  fit->add_option("--variant", fa.variant, "itr|pop|individual|subpop");
  fit->add_option("--unit", fa.unit, "time unit of the data files (minutes|hours|days)");
  fit->add_option("--k1", fa.k1);
  fit->add_option("--k2", fa.k2);
  fit->add_option("--train-cutoff", fa.cutoff, "fit on the first N observations only");
  fit->add_option("--fixed-gp-scale", fa.fixed_gp_scale, "pin sigma_u^2 to this value");
  fit->add_option("--seed", fa.seed)->each([&](const std::string&) { fa.seed_given = true; });

  // predict
  auto* pred = app.add_subcommand("predict", "posterior-predictive forecasts");
  std::string pr_data, pr_fit, pr_out = default_out_dir(), pr_unit = "minutes";
  int pr_cutoff = 50;
  std::uint64_t pr_seed = 0;
  pred->add_option("--data", pr_data)->required();
  pred->add_option("--fit", pr_fit, "directory with trace files")->required();
  pred->add_option("--out", pr_out);
  pred->add_option("--cutoff", pr_cutoff);
  pred->add_option("--unit", pr_unit);
  pred->add_option("--seed", pr_seed);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "held-out RMSE with credible intervals");
  std::string ev_data, ev_fit, ev_out = default_out_dir(), ev_unit = "minutes";
  int ev_cutoff = 50;
  double ev_bucket = 1440.0;
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--fit", ev_fit)->required();
  ev->add_option("--out", ev_out);
  ev->add_option("--cutoff", ev_cutoff);
  ev->add_option("--bucket-minutes", ev_bucket);
  ev->add_option("--unit", ev_unit);

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "acceptance rates and trace summaries");
  std::string dg_fit, dg_out = default_out_dir();
  diag->add_option("--fit", dg_fit)->required();
  diag->add_option("--out", dg_out);

  // bound
  auto* bound = app.add_subcommand("bound", "stick-breaking truncation error bound");
  int b_n = 500, b_k = 20;
  double b_m = 1.0;
  bound->add_option("--n", b_n, "number of time series");
  bound->add_option("--k", b_k, "truncation level");
  bound->add_option("--m", b_m, "concentration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      Config cfg = load_config(sim_config);
      if (sim_seed_given) cfg.set("sim.seed", std::to_string(sim_seed));
      if (sim_n > 0) cfg.set("sim.n", sim_n);
      const SimConfig sc = sim_from_config(cfg);
      auto [cohort, truth] = simulate_cohort(sc);
      std::filesystem::create_directories(sim_out);
      write_cohort(sim_out, cohort);
      write_ground_truth(sim_out + "/ground_truth.json", truth, cohort);
      double obs = 0.0, treats = 0.0;
      for (const auto& t : cohort.trajectories) {
        obs += t.n_obs();
        treats += t.treatments.size();
      }
      std::cout << "simulated " << cohort.n_indiv() << " trajectories (mean "
                << obs / cohort.n_indiv() << " observations, " << treats / cohort.n_indiv()
                << " treatments) into " << sim_out << "\n";
      return 0;
    }
    if (fit->parsed()) return cmd_fit(fa);
    if (pred->parsed()) return cmd_predict(pr_data, pr_fit, pr_out, pr_cutoff, pr_unit, pr_seed);
    if (ev->parsed()) return cmd_evaluate(ev_data, ev_fit, ev_out, ev_cutoff, ev_bucket, ev_unit);
    if (diag->parsed()) return cmd_diagnose(dg_fit, dg_out);
    if (bound->parsed()) {
      std::cout.precision(10);
      std::cout << itr::truncation_error_bound(b_n, b_k, b_m) << "\n";
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
