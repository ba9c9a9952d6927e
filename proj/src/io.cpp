#include "itr/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace itr {

namespace {

constexpr const char* kTableVersion = "# itr-tables 1";
constexpr const char* kTraceMagic = "ITR-TRACE 1";

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct CsvReader {
  std::string path;
  std::ifstream in;
  int line_no = 0;

  explicit CsvReader(const std::string& p) : path(p), in(p) {
    if (!in) throw std::runtime_error(p + ": cannot open");
    std::string version;
    std::getline(in, version);
    ++line_no;
    if (version != kTableVersion) {
      throw std::runtime_error(path + ": unknown file version '" + version + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      fields.clear();
      std::istringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) fields.push_back(tok);
      return true;
    }
    return false;
  }

  double num(const std::string& s) const {
    try {
      size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) fail("non-numeric field '" + s + "'");
      return v;
    } catch (const std::invalid_argument&) {
      fail("non-numeric field '" + s + "'");
    } catch (const std::out_of_range&) {
      fail("number out of range '" + s + "'");
    }
  }

  void expect_header(const std::string& expected) {
    std::string line;
    if (!std::getline(in, line)) fail("missing header row");
    ++line_no;
    if (line != expected) fail("expected header '" + expected + "', got '" + line + "'");
  }
};

}  // namespace

void write_cohort(const std::string& dir, const Cohort& cohort) {
  {
    std::ofstream out(dir + "/observations.csv");
    if (!out) throw std::runtime_error(dir + "/observations.csv: cannot write");
    out << kTableVersion << "\ntrajectory_id,time,value\n";
    for (const auto& t : cohort.trajectories) {
      for (int j = 0; j < t.n_obs(); ++j) {
        out << t.id << "," << fmt(t.times[j]) << "," << fmt(t.outcomes[j]) << "\n";
      }
    }
  }
  {
    std::ofstream out(dir + "/covariates.csv");
    out << kTableVersion << "\ntrajectory_id,time,name,value\n";
    for (const auto& t : cohort.trajectories) {
      // Column 0 is the intercept, re-added on ingest; remaining columns are
      // written as time-varying covariates x1, x2, ...
      for (int j = 0; j < t.n_obs(); ++j) {
        for (int c = 1; c < t.n_cov(); ++c) {
          out << t.id << "," << fmt(t.times[j]) << ",x" << c << ","
              << fmt(t.covariates(j, c)) << "\n";
        }
      }
    }
  }
  {
    std::ofstream out(dir + "/treatments.csv");
    out << kTableVersion << "\ntrajectory_id,time,type\n";
    for (const auto& t : cohort.trajectories) {
      for (const auto& ev : t.treatments) {
        out << t.id << "," << fmt(ev.time) << "," << ev.kind << "\n";
      }
    }
  }
}

Cohort read_cohort(const std::string& dir, double unit_to_minutes) {
  if (!(unit_to_minutes > 0.0)) throw std::runtime_error("read_cohort: bad time unit");

  struct Raw {
    std::vector<std::pair<double, double>> obs;  // (time, value)
    std::map<std::string, std::map<double, double>> covariates;  // name -> time -> value
    std::map<std::string, double> static_covariates;
    std::vector<TreatmentEvent> events;
  };
  std::map<std::string, Raw> raws;
  std::vector<std::string> order;

  {
    CsvReader r(dir + "/observations.csv");
    r.expect_header("trajectory_id,time,value");
    std::vector<std::string> f;
    while (r.next(f)) {
      if (f.size() != 3) r.fail("expected 3 columns");
      if (!raws.count(f[0])) order.push_back(f[0]);
      raws[f[0]].obs.emplace_back(r.num(f[1]) * unit_to_minutes, r.num(f[2]));
    }
  }
  {
    CsvReader r(dir + "/covariates.csv");
    r.expect_header("trajectory_id,time,name,value");
    std::vector<std::string> f;
    while (r.next(f)) {
      if (f.size() != 4) r.fail("expected 4 columns");
      if (!raws.count(f[0])) r.fail("covariate row for unknown trajectory '" + f[0] + "'");
      const double time = r.num(f[1]);
      const double value = r.num(f[3]);
      if (time == -1.0) {
        raws[f[0]].static_covariates[f[2]] = value;
      } else {
        raws[f[0]].covariates[f[2]][time * unit_to_minutes] = value;
      }
    }
  }
  int max_kind = 0;
  {
    CsvReader r(dir + "/treatments.csv");
    r.expect_header("trajectory_id,time,type");
    std::vector<std::string> f;
    while (r.next(f)) {
      if (f.size() != 3) r.fail("expected 3 columns");
      if (!raws.count(f[0])) r.fail("treatment row for unknown trajectory '" + f[0] + "'");
      const double kind_raw = r.num(f[2]);
      const int kind = static_cast<int>(kind_raw);
      if (kind != kind_raw || kind < 1) r.fail("unknown treatment type '" + f[2] + "'");
      max_kind = std::max(max_kind, kind);
      raws[f[0]].events.push_back(TreatmentEvent{r.num(f[1]) * unit_to_minutes, kind});
    }
  }

  Cohort cohort;
  cohort.n_types = max_kind;
  for (const auto& id : order) {
    Raw& raw = raws[id];
    std::sort(raw.obs.begin(), raw.obs.end());
    for (size_t j = 1; j < raw.obs.size(); ++j) {
      if (raw.obs[j].first == raw.obs[j - 1].first) {
        throw std::runtime_error(dir + "/observations.csv: duplicate timestamp " +
                                 fmt(raw.obs[j].first) + " in trajectory " + id);
      }
    }
    Trajectory t;
    t.id = id;
    const int j = static_cast<int>(raw.obs.size());
    t.times.resize(j);
    t.outcomes.resize(j);
    std::set<std::string> names;
    for (const auto& [name, _] : raw.covariates) names.insert(name);
    for (const auto& [name, _] : raw.static_covariates) names.insert(name);
    t.covariates.resize(j, 1 + static_cast<int>(names.size()));
    for (int m = 0; m < j; ++m) {
      t.times[m] = raw.obs[m].first;
      t.outcomes[m] = raw.obs[m].second;
      t.covariates(m, 0) = 1.0;
      int c = 1;
      for (const auto& name : names) {
        if (auto s = raw.static_covariates.find(name); s != raw.static_covariates.end()) {
          t.covariates(m, c) = s->second;
        } else {
          const auto& series = raw.covariates.at(name);
          const auto it = series.find(t.times[m]);
          if (it == series.end()) {
            throw std::runtime_error(dir + "/covariates.csv: trajectory " + id +
                                     " missing covariate '" + name + "' at time " +
                                     fmt(t.times[m]));
          }
          t.covariates(m, c) = it->second;
        }
        ++c;
      }
    }
    std::sort(raw.events.begin(), raw.events.end(),
              [](const TreatmentEvent& a, const TreatmentEvent& b) { return a.time < b.time; });
    t.treatments = std::move(raw.events);
    cohort.trajectories.push_back(std::move(t));
  }
  cohort.validate();
  return cohort;
}

void write_ground_truth(const std::string& path, const GroundTruth& truth,
                        const Cohort& cohort) {
  nlohmann::json root;
  root["format"] = "itr-ground-truth";
  root["version"] = 1;
  auto& arr = root["individuals"] = nlohmann::json::array();
  for (size_t i = 0; i < truth.individuals.size(); ++i) {
    const auto& g = truth.individuals[i];
    nlohmann::json j;
    j["id"] = cohort.trajectories[i].id;
    j["baseline_label"] = g.baseline_label;
    j["response_label"] = g.response_label;
    j["beta"] = std::vector<double>(g.baseline.beta.data(),
                                    g.baseline.beta.data() + g.baseline.beta.size());
    j["sigma_u_sq"] = g.baseline.sigma_u_sq;
    j["rho_u"] = g.baseline.rho_u;
    auto& resp = j["response"] = nlohmann::json::array();
    for (const auto& p : g.response) {
      resp.push_back({{"alpha1", p.alpha1},
                      {"alpha2", p.alpha2},
                      {"alpha3", p.alpha3},
                      {"gamma", p.gamma},
                      {"b", p.b}});
    }
    j["baseline_values"] = std::vector<double>(
        g.baseline_values.data(), g.baseline_values.data() + g.baseline_values.size());
    j["response_values"] = std::vector<double>(
        g.response_values.data(), g.response_values.data() + g.response_values.size());
    arr.push_back(std::move(j));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot write");
  out << root.dump(1) << "\n";
}

GroundTruth read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  nlohmann::json root;
  in >> root;
  if (root.value("format", "") != "itr-ground-truth" || root.value("version", 0) != 1) {
    throw std::runtime_error(path + ": unknown ground-truth format/version");
  }
  GroundTruth truth;
  for (const auto& j : root.at("individuals")) {
    GroundTruth::PerIndividual g;
    g.baseline_label = j.at("baseline_label").get<int>();
    g.response_label = j.at("response_label").get<std::vector<int>>();
    const auto beta = j.at("beta").get<std::vector<double>>();
    g.baseline.beta = Eigen::Map<const Vec>(beta.data(), beta.size());
    g.baseline.sigma_u_sq = j.at("sigma_u_sq").get<double>();
    g.baseline.rho_u = j.at("rho_u").get<double>();
    for (const auto& r : j.at("response")) {
      ResponseParams p;
      p.alpha1 = r.at("alpha1").get<double>();
      p.alpha2 = r.at("alpha2").get<double>();
      p.alpha3 = r.at("alpha3").get<double>();
      p.gamma = r.at("gamma").get<double>();
      p.b = r.at("b").get<double>();
      g.response.push_back(p);
    }
    const auto bv = j.at("baseline_values").get<std::vector<double>>();
    g.baseline_values = Eigen::Map<const Vec>(bv.data(), bv.size());
    const auto rv = j.at("response_values").get<std::vector<double>>();
    g.response_values = Eigen::Map<const Vec>(rv.data(), rv.size());
    truth.individuals.push_back(std::move(g));
  }
  return truth;
}

namespace {

int record_doubles(const Hyperparams& h, const std::vector<int>& obs_counts) {
  const int n = static_cast<int>(obs_counts.size());
  int r = 0;
  for (int j : obs_counts) r += h.p + 2 + j + 1 + 5 * h.n_types;
  r += 2 * h.n_types;                                      // noise primes
  r += h.k1 + 1 + n + h.k1 * (h.p + h.p * h.p + 2);        // baseline mixture
  for (int d = 0; d < h.n_types; ++d) r += h.k2[d] + 1 + n + 5 * h.k2[d];
  return r;
}

void pack_state(const ParamState& s, const Hyperparams& h, std::vector<double>& buf) {
  const int n = static_cast<int>(s.baseline.size());
  for (int i = 0; i < n; ++i) {
    const auto& b = s.baseline[i];
    buf.insert(buf.end(), b.beta.data(), b.beta.data() + b.beta.size());
    buf.push_back(b.sigma_u_sq);
    buf.push_back(b.rho_u);
    const auto& u = s.random_effects[i].u;
    buf.insert(buf.end(), u.data(), u.data() + u.size());
    buf.push_back(s.noise.sigma_eps_sq[i]);
    for (int d = 0; d < h.n_types; ++d) {
      const auto& p = s.response[i][d];
      buf.insert(buf.end(), {p.alpha1, p.alpha2, p.alpha3, p.gamma, p.b});
    }
  }
  for (int d = 0; d < h.n_types; ++d) {
    buf.push_back(s.noise.sigma_eps_prime_sq[d]);
    buf.push_back(s.noise.rho_eps_prime[d]);
  }
  buf.insert(buf.end(), s.base_mix.sticks.data(),
             s.base_mix.sticks.data() + s.base_mix.sticks.size());
  buf.push_back(s.base_mix.concentration);
  for (int z : s.base_mix.assignments) buf.push_back(z);
  for (const auto& c : s.base_comps) {
    buf.insert(buf.end(), c.beta_star.data(), c.beta_star.data() + c.beta_star.size());
    buf.insert(buf.end(), c.sigma_star.data(),
               c.sigma_star.data() + c.sigma_star.size());
    buf.push_back(c.mu_sigma_u_star);
    buf.push_back(c.mu_rho_u_star);
  }
  for (int d = 0; d < h.n_types; ++d) {
    const auto& mix = s.resp_mix[d];
    buf.insert(buf.end(), mix.sticks.data(), mix.sticks.data() + mix.sticks.size());
    buf.push_back(mix.concentration);
    for (int z : mix.assignments) buf.push_back(z);
    for (const auto& c : s.resp_comps[d]) {
      buf.insert(buf.end(), c.mu_star.data(), c.mu_star.data() + 5);
    }
  }
}

ParamState unpack_state(const double* rec, const Hyperparams& h,
                        const std::vector<int>& obs_counts) {
  ParamState s;
  const int n = static_cast<int>(obs_counts.size());
  auto take = [&rec](int len) {
    const double* p = rec;
    rec += len;
    return p;
  };
  s.baseline.resize(n);
  s.random_effects.resize(n);
  s.response.assign(n, std::vector<ResponseParams>(h.n_types));
  s.noise.sigma_eps_sq.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& b = s.baseline[i];
    b.beta = Eigen::Map<const Vec>(take(h.p), h.p);
    b.sigma_u_sq = *take(1);
    b.rho_u = *take(1);
    s.random_effects[i].u = Eigen::Map<const Vec>(take(obs_counts[i]), obs_counts[i]);
    s.noise.sigma_eps_sq[i] = *take(1);
    for (int d = 0; d < h.n_types; ++d) {
      const double* v = take(5);
      s.response[i][d] = ResponseParams{v[0], v[1], v[2], v[3], v[4]};
    }
  }
  s.noise.sigma_eps_prime_sq.resize(h.n_types);
  s.noise.rho_eps_prime.resize(h.n_types);
  for (int d = 0; d < h.n_types; ++d) {
    s.noise.sigma_eps_prime_sq[d] = *take(1);
    s.noise.rho_eps_prime[d] = *take(1);
  }
  s.base_mix.sticks = Eigen::Map<const Vec>(take(h.k1), h.k1);
  s.base_mix.weights = stick_weights(s.base_mix.sticks);
  s.base_mix.concentration = *take(1);
  s.base_mix.assignments.resize(n);
  for (int i = 0; i < n; ++i) s.base_mix.assignments[i] = static_cast<int>(*take(1));
  s.base_comps.resize(h.k1);
  for (auto& c : s.base_comps) {
    c.beta_star = Eigen::Map<const Vec>(take(h.p), h.p);
    c.sigma_star = Eigen::Map<const Mat>(take(h.p * h.p), h.p, h.p);
    c.mu_sigma_u_star = *take(1);
    c.mu_rho_u_star = *take(1);
  }
  s.resp_mix.resize(h.n_types);
  s.resp_comps.resize(h.n_types);
  for (int d = 0; d < h.n_types; ++d) {
    auto& mix = s.resp_mix[d];
    mix.sticks = Eigen::Map<const Vec>(take(h.k2[d]), h.k2[d]);
    mix.weights = stick_weights(mix.sticks);
    mix.concentration = *take(1);
    mix.assignments.resize(n);
    for (int i = 0; i < n; ++i) mix.assignments[i] = static_cast<int>(*take(1));
    s.resp_comps[d].resize(h.k2[d]);
    for (auto& c : s.resp_comps[d]) c.mu_star = Eigen::Map<const Vec5>(take(5));
  }
  return s;
}

}  // namespace

void write_trace(const std::string& path, const PosteriorTrace& trace,
                 const Hyperparams& h, const std::vector<int>& obs_counts,
                 const std::string& config_echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot write");
  const int rec = record_doubles(h, obs_counts);
  out << kTraceMagic << "\n";
  out << "seed " << trace.seed << "\n";
  out << "chain " << trace.chain_index << "\n";
  out << "elapsed " << fmt(trace.elapsed_seconds) << "\n";
  out << "p " << h.p << "\n";
  out << "n_types " << h.n_types << "\n";
  out << "k1 " << h.k1 << "\n";
  out << "k2";
  for (int v : h.k2) out << " " << v;
  out << "\n";
  out << "n_indiv " << obs_counts.size() << "\n";
  out << "obs_counts";
  for (int v : obs_counts) out << " " << v;
  out << "\n";
  out << "draws " << trace.draws.size() << "\n";
  out << "record_doubles " << rec << "\n";
  out << "accept_gp " << trace.accept.gp.proposed << " " << trace.accept.gp.accepted << "\n";
  out << "accept_noise " << trace.accept.noise.proposed << " " << trace.accept.noise.accepted
      << "\n";
  for (int d = 0; d < h.n_types; ++d) {
    out << "accept_resp " << trace.accept.response[d].proposed << " "
        << trace.accept.response[d].accepted << "\n";
  }
  out << "config_begin\n" << config_echo;
  if (!config_echo.empty() && config_echo.back() != '\n') out << "\n";
  out << "config_end\nbinary\n";
  std::vector<double> buf;
  buf.reserve(rec);
  for (const auto& draw : trace.draws) {
    buf.clear();
    pack_state(draw, h, buf);
    if (static_cast<int>(buf.size()) != rec) {
      throw std::runtime_error("write_trace: record size mismatch");
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
  }
}

TraceFile read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  std::getline(in, line);
  if (line != kTraceMagic) throw std::runtime_error(path + ": unknown trace version");

  TraceFile tf;
  int n_draws = 0, rec = 0, n_indiv = 0;
  Hyperparams& h = tf.dims;
  h = Hyperparams::defaults(1, 1);
  std::vector<std::pair<long long, long long>> resp_accept;
  while (std::getline(in, line)) {
    if (line == "binary") break;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "seed") {
      ss >> tf.trace.seed;
    } else if (key == "chain") {
      ss >> tf.trace.chain_index;
    } else if (key == "elapsed") {
      ss >> tf.trace.elapsed_seconds;
    } else if (key == "p") {
      ss >> h.p;
    } else if (key == "n_types") {
      ss >> h.n_types;
    } else if (key == "k1") {
      ss >> h.k1;
    } else if (key == "k2") {
      h.k2.clear();
      int v;
      while (ss >> v) h.k2.push_back(v);
    } else if (key == "n_indiv") {
      ss >> n_indiv;
    } else if (key == "obs_counts") {
      tf.obs_counts.clear();
      int v;
      while (ss >> v) tf.obs_counts.push_back(v);
    } else if (key == "draws") {
      ss >> n_draws;
    } else if (key == "record_doubles") {
      ss >> rec;
    } else if (key == "accept_gp") {
      ss >> tf.trace.accept.gp.proposed >> tf.trace.accept.gp.accepted;
    } else if (key == "accept_noise") {
      ss >> tf.trace.accept.noise.proposed >> tf.trace.accept.noise.accepted;
    } else if (key == "accept_resp") {
      long long p = 0, a = 0;
      ss >> p >> a;
      resp_accept.emplace_back(p, a);
    } else if (key == "config_begin") {
      std::ostringstream cfg;
      while (std::getline(in, line) && line != "config_end") cfg << line << "\n";
      tf.config_echo = cfg.str();
    } else {
      throw std::runtime_error(path + ": unknown trace header key '" + key + "'");
    }
  }
  if (static_cast<int>(tf.obs_counts.size()) != n_indiv ||
      static_cast<int>(h.k2.size()) != h.n_types) {
    throw std::runtime_error(path + ": inconsistent trace header");
  }
  tf.trace.accept.response.resize(h.n_types);
  for (int d = 0; d < h.n_types && d < static_cast<int>(resp_accept.size()); ++d) {
    tf.trace.accept.response[d].proposed = resp_accept[d].first;
    tf.trace.accept.response[d].accepted = resp_accept[d].second;
  }
  if (rec != record_doubles(h, tf.obs_counts)) {
    throw std::runtime_error(path + ": record size does not match dimensions");
  }
  std::vector<double> buf(rec);
  tf.trace.draws.reserve(n_draws);
  for (int k = 0; k < n_draws; ++k) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated payload");
    tf.trace.draws.push_back(unpack_state(buf.data(), h, tf.obs_counts));
  }
  return tf;
}

void write_rmse_report(const std::string& path, const RmseReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot write");
  out << kTableVersion << "\nbucket,lo_minutes,hi_minutes,n_obs,rmse,ci_lo,ci_hi\n";
  auto row = [&](const std::string& name, const RmseBucket& b) {
    out << name << "," << fmt(b.lo_minutes) << "," << fmt(b.hi_minutes) << "," << b.n_obs
        << "," << fmt(b.rmse) << "," << fmt(b.ci_lo) << "," << fmt(b.ci_hi) << "\n";
  };
  row("overall", report.overall);
  for (size_t k = 0; k < report.buckets.size(); ++k) {
    if (report.buckets[k].n_obs == 0) continue;  // absent buckets are omitted
    row(std::to_string(k), report.buckets[k]);
  }
}

void write_curve_band(const std::string& path, const CurveBand& band) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot write");
  out << kTableVersion << "\nt,mean,lo,hi\n";
  for (int j = 0; j < band.grid.size(); ++j) {
    out << fmt(band.grid[j]) << "," << fmt(band.mean[j]) << "," << fmt(band.lo[j]) << ","
        << fmt(band.hi[j]) << "\n";
  }
}

}  // namespace itr
