// Accuracy metrics, the penetration sweep and report files.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigdemand/estimators.hpp"
#include "sigdemand/simulator.hpp"

namespace sigdemand {

struct Metrics {
  /// Absent when no estimate succeeded.
  std::optional<double> mae_veh;
  /// Absent when no successful estimate has a non-zero true demand.
  std::optional<double> mape_frac;
  double success_rate = 0.0;
  int total = 0;
  int successes = 0;
  /// Successful estimates left out of MAPE because the true demand is 0.
  int zero_demand_excluded = 0;
};

/// One row per (phase, cycle) target; every row needs a truth entry.
/// Throws Error("misaligned") otherwise.
Metrics compute_metrics(std::span<const DemandEstimate> estimates, const GroundTruth& truth);

struct SweepConfig {
  ScenarioConfig scenario;
  std::vector<double> penetrations;
  std::vector<std::uint64_t> seeds;
  std::vector<Method> methods{Method::Wmle, Method::JoMle, Method::JoMap};
  /// Historical CV sets per penetration, drawn from a separate simulation.
  int historical_samples = 10;
  std::uint64_t historical_seed_offset = 7919;
  std::uint64_t historical_sample_seed_base = 1000000;
  /// 0: one worker per hardware thread.
  unsigned threads = 0;
};

struct SweepRow {
  Method method = Method::JoMap;
  double penetration = 0.0;
  std::uint64_t seed = 0;
  Metrics metrics;
  /// Set when the cell could not be run; metrics then count every target
  /// as failed.
  std::optional<std::string> error;
};

struct SweepRecord {
  double penetration = 0.0;
  std::uint64_t seed = 0;
  DemandEstimate estimate;
};

struct SweepResult {
  /// Ordered by penetration (input order), seed, method.
  std::vector<SweepRow> rows;
  std::vector<SweepRecord> records;
};

SweepResult run_sweep(const SweepConfig& config);

struct AggregateRow {
  Method method = Method::JoMap;
  double penetration = 0.0;
  int cells = 0;
  std::optional<double> mae_mean, mae_std;
  std::optional<double> mape_mean, mape_std;
  double sr_mean = 0.0;
  double sr_std = 0.0;
};

/// Mean and sample standard deviation over seeds, sorted by penetration
/// then method.
std::vector<AggregateRow> aggregate(const SweepResult& result);
const AggregateRow* find_aggregate(std::span<const AggregateRow> rows, Method method,
                                   double penetration);

/// Writes estimates.csv, metrics.json and plot.csv into out_dir.
void emit_report(const SweepResult& result, const std::filesystem::path& out_dir);

std::string metrics_json(const Metrics& metrics);

}  // namespace sigdemand
