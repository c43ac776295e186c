// Joint prior: Gaussian priors on phase shares from historical CV counts,
// and the uniform support of the total arrival rate.
#pragma once

#include <span>
#include <vector>

#include "sigdemand/domain.hpp"

namespace sigdemand {

inline constexpr double kMinShareStddev = 0.02;
inline constexpr int kMinUsableBins = 6;
inline constexpr double kFlatFallbackStddev = 0.25;
inline constexpr double kCountBinSeconds = 300.0;

struct PhaseCountSeries {
  PhaseId phase_id = 0;
  /// CV counts per 5-minute bin.
  std::vector<int> counts;
};

struct PhasePrior {
  PhaseId phase_id = 0;
  double mean_share = 0.0;
  double variance = 0.0;
};

struct AlphaPrior {
  std::vector<PhasePrior> phases;
  int sample_count = 0;
  bool flat_fallback = false;
};

struct PriorSpec {
  std::vector<PhasePrior> phases;
  double lambda0_upper = 0.0;
  int sample_count = 0;
  bool flat_fallback = false;

  const PhasePrior& phase(PhaseId id) const;
};

/// Share samples N_z / sum N per bin with a positive total; mean and sample
/// variance (floored at kMinShareStddev^2). Fewer than kMinUsableBins usable
/// bins gives the flat prior 1/Z with stddev kFlatFallbackStddev.
AlphaPrior build_alpha_prior(std::span<const PhaseCountSeries> series,
                             double min_stddev = kMinShareStddev,
                             int min_usable_bins = kMinUsableBins);

/// Upper end of the total-rate support: sum of lanes / saturation headway.
/// Throws Error("invalid_argument") for a non-positive headway.
double lambda0_support(std::span<const PhaseConfig> phases, double sat_headway_s);

PriorSpec make_prior(AlphaPrior alpha, double lambda0_upper);

}  // namespace sigdemand
