#pragma once

#include <string>
#include <vector>

#include "itr/evaluate.hpp"
#include "itr/sampler.hpp"
#include "itr/simulator.hpp"
#include "itr/types.hpp"

namespace itr {

/// Writes observations.csv / covariates.csv / treatments.csv (17 significant
/// digits, lossless for doubles).
void write_cohort(const std::string& dir, const Cohort& cohort);

/// Reads the three tabular files; times are multiplied by unit_to_minutes on
/// ingest and an intercept column is prepended to the covariates. Parse errors
/// name the file and line.
Cohort read_cohort(const std::string& dir, double unit_to_minutes = 1.0);

void write_ground_truth(const std::string& path, const GroundTruth& truth,
                        const Cohort& cohort);
GroundTruth read_ground_truth(const std::string& path);

/// Binary trace file: self-describing ASCII header (dims, seed, acceptance
/// counts, config echo) followed by little-endian double records; the payload
/// round-trips bitwise.
void write_trace(const std::string& path, const PosteriorTrace& trace,
                 const Hyperparams& h, const std::vector<int>& obs_counts,
                 const std::string& config_echo);

struct TraceFile {
  PosteriorTrace trace;
  Hyperparams dims;  // p/n_types/k1/k2 as read back (other fields default)
  std::vector<int> obs_counts;
  std::string config_echo;
};

TraceFile read_trace(const std::string& path);

void write_rmse_report(const std::string& path, const RmseReport& report);
void write_curve_band(const std::string& path, const CurveBand& band);

}  // namespace itr
