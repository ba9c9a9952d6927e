#include "itr/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "itr/curves.hpp"
#include "itr/kernels.hpp"
#include "itr/mvn.hpp"

namespace itr {

ForecastRequest ForecastRequest::held_out(const Trajectory& traj, int cutoff) {
  if (cutoff < 1 || cutoff >= traj.n_obs()) {
    throw std::invalid_argument("ForecastRequest: cutoff must leave data on both sides");
  }
  ForecastRequest req;
  req.cutoff = cutoff;
  const int n_fut = traj.n_obs() - cutoff;
  req.future_times = traj.times.tail(n_fut);
  req.future_covariates = traj.covariates.bottomRows(n_fut);
  const double train_end = traj.times[cutoff - 1];
  for (const auto& ev : traj.treatments) {
    if (ev.time > train_end) req.future_events.push_back(ev);
  }
  return req;
}

void ForecastRequest::validate(const Trajectory& traj) const {
  if (cutoff < 1 || cutoff > traj.n_obs()) {
    throw std::invalid_argument("ForecastRequest: bad cutoff");
  }
  const double train_end = traj.times[cutoff - 1];
  for (int j = 0; j < future_times.size(); ++j) {
    if (!(future_times[j] > train_end)) {
      throw std::invalid_argument("ForecastRequest: future time not after training end");
    }
  }
  if (future_covariates.rows() != future_times.size() ||
      future_covariates.cols() != traj.covariates.cols()) {
    throw std::invalid_argument("ForecastRequest: covariate block mismatch");
  }
}

Variant parse_variant(const std::string& name) {
  if (name == "itr") return Variant::kItr;
  if (name == "pop") return Variant::kPop;
  if (name == "individual") return Variant::kIndividual;
  if (name == "subpop") return Variant::kSubpop;
  throw std::invalid_argument("unknown variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kItr: return "itr";
    case Variant::kPop: return "pop";
    case Variant::kIndividual: return "individual";
    case Variant::kSubpop: return "subpop";
  }
  return "?";
}

Forecast posterior_predict(const ParamState& draw, int i, const Trajectory& traj,
                           const ForecastRequest& req, const Hyperparams& h, Rng& rng) {
  const int n_tr = req.cutoff;
  const int n_fut = static_cast<int>(req.future_times.size());
  if (i < 0 || i >= static_cast<int>(draw.baseline.size())) {
    throw std::invalid_argument("posterior_predict: individual index out of range");
  }
  const auto& base = draw.baseline[i];
  const double s2_eps = draw.noise.sigma_eps_sq[i];

  // All events (training regime + prescribed future regime); responses before
  // a time only ever involve events before it.
  const double train_end = traj.times[n_tr - 1];
  std::vector<TreatmentEvent> events;
  for (const auto& ev : traj.treatments) {
    if (ev.time <= train_end) events.push_back(ev);
  }
  events.insert(events.end(), req.future_events.begin(), req.future_events.end());
  std::sort(events.begin(), events.end(),
            [](const TreatmentEvent& a, const TreatmentEvent& b) { return a.time < b.time; });

  Vec joint_times(n_tr + n_fut);
  joint_times.head(n_tr) = traj.times.head(n_tr);
  joint_times.tail(n_fut) = req.future_times;

  Mat k = exp_kernel(base.sigma_u_sq, base.rho_u, joint_times);
  k += treatment_noise_kernel(draw.noise.sigma_eps_prime_sq, draw.noise.rho_eps_prime,
                              joint_times, events, h.noise_window_minutes);

  const Vec f_all = cumulative_response(draw.response[i], events, joint_times);
  const Vec r = traj.outcomes.head(n_tr) - traj.covariates.topRows(n_tr) * base.beta -
                f_all.head(n_tr);

  Mat c_tt = k.topLeftCorner(n_tr, n_tr);
  c_tt.diagonal().array() += s2_eps;
  const CholeskySpd chol_tt = chol_spd(c_tt, "posterior_predict training block");
  const Mat k_ft = k.bottomLeftCorner(n_fut, n_tr);
  const Vec alpha = chol_tt.solve(r);

  Forecast out;
  const Vec structural = req.future_covariates * base.beta + f_all.tail(n_fut);
  out.mean = structural + k_ft * alpha;

  // The Schur complement can round to merely semidefinite when a future time
  // (nearly) coincides with a training time; the PSD sampler clamps it.
  const Mat cov =
      k.bottomRightCorner(n_fut, n_fut) - k_ft * chol_tt.solve(k_ft.transpose());
  out.sample = mvn_sample_psd(out.mean, cov, rng);
  for (int j = 0; j < n_fut; ++j) out.sample[j] += rng.normal(0.0, std::sqrt(s2_eps));
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * (static_cast<double>(values.size()) - 1.0);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const auto hi = static_cast<size_t>(std::ceil(pos));
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

Cohort truncate_cohort(const Cohort& cohort, int cutoff) {
  Cohort out;
  out.n_types = cohort.n_types;
  for (const auto& traj : cohort.trajectories) {
    const int keep = std::min(cutoff, traj.n_obs());
    Trajectory t;
    t.id = traj.id;
    t.times = traj.times.head(keep);
    t.outcomes = traj.outcomes.head(keep);
    t.covariates = traj.covariates.topRows(keep);
    const double end = t.times[keep - 1];
    for (const auto& ev : traj.treatments) {
      if (ev.time <= end) t.treatments.push_back(ev);
    }
    out.trajectories.push_back(std::move(t));
  }
  return out;
}

RmseReport evaluate_rmse(const std::vector<PosteriorTrace>& traces, const Cohort& cohort,
                         int cutoff, double bucket_width_minutes, const Hyperparams& h) {
  if (traces.empty() || traces.front().draws.empty()) {
    throw std::invalid_argument("evaluate_rmse: need at least one trace with one draw");
  }
  if (!(bucket_width_minutes > 0.0)) {
    throw std::invalid_argument("evaluate_rmse: bucket width must be positive");
  }
  std::size_t n_draws = 0;
  for (const auto& tr : traces) n_draws += tr.draws.size();

  const int n = cohort.n_indiv();
  struct PerIndiv {
    ForecastRequest req;
    Vec mean_pred;               // accumulated over draws
    std::vector<Vec> draw_pred;  // per draw
    std::vector<int> bucket;     // per future obs
    int idx = 0;
  };
  std::vector<PerIndiv> work;
  int max_bucket = -1;
  for (int i = 0; i < n; ++i) {
    const auto& traj = cohort.trajectories[i];
    if (traj.n_obs() <= cutoff) continue;  // nothing held out
    PerIndiv w;
    w.idx = i;
    w.req = ForecastRequest::held_out(traj, cutoff);
    w.mean_pred = Vec::Zero(w.req.future_times.size());
    w.draw_pred.reserve(n_draws);
    const double train_end = traj.times[cutoff - 1];
    for (int j = 0; j < w.req.future_times.size(); ++j) {
      const int b = static_cast<int>((w.req.future_times[j] - train_end) / bucket_width_minutes);
      w.bucket.push_back(b);
      max_bucket = std::max(max_bucket, b);
    }
    work.push_back(std::move(w));
  }
  if (work.empty()) throw std::invalid_argument("evaluate_rmse: no held-out observations");

  Rng rng(0);  // prediction means are deterministic; samples are not used here
  for (auto& w : work) {
    for (const auto& tr : traces) {
      for (const auto& draw : tr.draws) {
        Forecast fc =
            posterior_predict(draw, w.idx, cohort.trajectories[w.idx], w.req, h, rng);
        w.mean_pred += fc.mean;
        w.draw_pred.push_back(std::move(fc.mean));
      }
    }
    w.mean_pred /= static_cast<double>(n_draws);
  }

  const int n_buckets = max_bucket + 1;
  RmseReport report;
  report.buckets.resize(n_buckets);

  // RMSE of the mean prediction, per individual per bucket, then averaged
  // across the individuals present in the bucket.
  auto bucket_rmse = [&](const PerIndiv& w, const Vec& pred, int b, bool overall) {
    double ss = 0.0;
    int cnt = 0;
    const auto& traj = cohort.trajectories[w.idx];
    for (int j = 0; j < pred.size(); ++j) {
      if (!overall && w.bucket[j] != b) continue;
      const double e = pred[j] - traj.outcomes[w.req.cutoff + j];
      ss += e * e;
      ++cnt;
    }
    return cnt > 0 ? std::optional<double>(std::sqrt(ss / cnt)) : std::nullopt;
  };

  for (int b = -1; b < n_buckets; ++b) {
    const bool overall = b < 0;
    RmseBucket& out = overall ? report.overall : report.buckets[b];
    out.lo_minutes = overall ? 0.0 : b * bucket_width_minutes;
    out.hi_minutes = overall ? 0.0 : (b + 1) * bucket_width_minutes;
    double sum = 0.0;
    int n_indiv_in = 0;
    for (const auto& w : work) {
      if (auto r = bucket_rmse(w, w.mean_pred, b, overall)) {
        sum += *r;
        ++n_indiv_in;
        for (int j = 0; j < w.mean_pred.size(); ++j) {
          if (overall || w.bucket[j] == b) out.n_obs++;
        }
      }
    }
    if (n_indiv_in == 0) continue;  // absent bucket stays n_obs = 0
    out.rmse = sum / n_indiv_in;

    std::vector<double> per_draw;
    per_draw.reserve(n_draws);
    for (std::size_t dd = 0; dd < n_draws; ++dd) {
      double s = 0.0;
      int cnt = 0;
      for (const auto& w : work) {
        if (auto r = bucket_rmse(w, w.draw_pred[dd], b, overall)) {
          s += *r;
          ++cnt;
        }
      }
      if (cnt > 0) per_draw.push_back(s / cnt);
    }
    out.ci_lo = quantile(per_draw, 0.025);
    out.ci_hi = quantile(per_draw, 0.975);
  }
  return report;
}

Hyperparams apply_variant(Variant v, const Hyperparams& h, int n_indiv) {
  Hyperparams out = h;
  switch (v) {
    case Variant::kItr:
      break;
    case Variant::kPop:
      out.k1 = 1;
      out.k2.assign(h.n_types, 1);
      out.sigma_star_fixed = 1e-6;
      out.var_sigma_u_within = 1e-6;
      out.var_rho_u_within = 1e-6;
      out.var_resp_within = Vec5::Constant(1e-6);
      break;
    case Variant::kIndividual:
      out.k1 = n_indiv;
      out.k2.assign(h.n_types, n_indiv);
      out.pin_assignments = true;
      break;
    case Variant::kSubpop:
      out.sigma_star_fixed = 1e-6;
      out.var_sigma_u_within = 1e-6;
      out.var_rho_u_within = 1e-6;
      out.var_resp_within = Vec5::Constant(1e-6);
      break;
  }
  return out;
}

CurveBand extract_curves(const std::vector<PosteriorTrace>& traces, int i, int d,
                         const Vec& grid, bool normalize, const Cohort& cohort) {
  for (int j = 0; j < grid.size(); ++j) {
    if (grid[j] < 0.0) throw std::invalid_argument("extract_curves: negative grid time");
  }
  double scale = 1.0;
  if (normalize) {
    const auto& traj = cohort.trajectories[i];
    double init_time = -1.0;
    for (const auto& ev : traj.treatments) {
      if (ev.kind == d + 1) {
        init_time = ev.time;
        break;
      }
    }
    if (init_time < 0.0) {
      throw std::invalid_argument("extract_curves: no treatment of this type to normalize by");
    }
    double value = 0.0;
    bool found = false;
    for (int j = 0; j < traj.n_obs(); ++j) {
      if (traj.times[j] <= init_time) {
        value = traj.outcomes[j];
        found = true;
      }
    }
    if (!found || value == 0.0) {
      throw std::invalid_argument("extract_curves: no usable outcome at treatment initiation");
    }
    scale = value;
  }

  std::vector<std::vector<double>> values(grid.size());
  for (const auto& tr : traces) {
    for (const auto& draw : tr.draws) {
      const auto& p = draw.response[i][d];
      for (int j = 0; j < grid.size(); ++j) {
        values[j].push_back(eval_response_curve(p, grid[j]) / scale);
      }
    }
  }
  CurveBand band;
  band.grid = grid;
  band.mean.resize(grid.size());
  band.lo.resize(grid.size());
  band.hi.resize(grid.size());
  for (int j = 0; j < grid.size(); ++j) {
    double s = 0.0;
    for (double v : values[j]) s += v;
    band.mean[j] = s / values[j].size();
    band.lo[j] = quantile(values[j], 0.025);
    band.hi[j] = quantile(values[j], 0.975);
  }
  return band;
}

}  // namespace itr
