#pragma once

#include <map>
#include <string>
#include <vector>

#include "itr/dpm.hpp"
#include "itr/sampler.hpp"
#include "itr/simulator.hpp"

namespace itr {

/// Flat dotted-key configuration: one `key = value` pair per line, `#`
/// comments. CLI flags override file values; the merged result is echoed into
/// trace files so a run is reproducible from its outputs.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, int value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_vector(const std::string& key,
                                 const std::vector<double>& fallback) const;

  /// Sorted `key = value` lines.
  std::string serialize() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Hyperparameters from config keys under `hyper.` and `model.`, with the
/// defaults for the given dimensions.
Hyperparams hyperparams_from_config(const Config& cfg, int p, int n_types);

/// Sampler settings from keys under `sampler.`.
SamplerConfig sampler_from_config(const Config& cfg);

/// Simulation settings from keys under `sim.`.
SimConfig sim_from_config(const Config& cfg);

}  // namespace itr
