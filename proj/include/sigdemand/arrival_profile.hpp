// Within-cycle arrival profile eta over normalized cycle position, its
// cumulative Lambda(t), and the observation weights derived from it.
#pragma once

#include <span>
#include <vector>

#include "sigdemand/domain.hpp"
#include "sigdemand/trajectory_prep.hpp"

namespace sigdemand {

inline constexpr int kDefaultProfileBins = 20;
inline constexpr double kDefaultProfileFloor = 0.05;

/// Piecewise-constant eta on [0, 1] with mean 1, so lambda * eta(t) is the
/// instantaneous rate when lambda is the cycle average.
struct ArrivalProfile {
  PhaseId phase_id = 0;
  std::vector<double> bin_values;
  double floor_epsilon = kDefaultProfileFloor;

  static ArrivalProfile uniform(PhaseId phase_id, int bin_count = kDefaultProfileBins);

  int bin_count() const { return static_cast<int>(bin_values.size()); }
  /// H(tau): integral of eta over [0, tau], H(1) = 1.
  double cumulative_fraction(double tau) const;
};

struct HistoricalArrival {
  double arrival_offset_s = 0.0;
  double cycle_length_s = 0.0;
};

/// Histogram over tau = offset / C, floored at epsilon, renormalized to
/// mean 1. Empty history gives the uniform profile. Throws on bin_count < 1.
ArrivalProfile build_profile(PhaseId phase_id, std::span<const HistoricalArrival> history,
                             int bin_count = kDefaultProfileBins,
                             double floor_epsilon = kDefaultProfileFloor);

/// Lambda(t) = C H(t / C). Throws Error("out_of_range") for t outside [0, C].
double cumulative_arrivals(const ArrivalProfile& profile, double t_s, double cycle_length_s);

/// Fills raw_weight = Lambda(t_j) and norm_weight = w_j x / sum(w).
/// Throws Error("zero_weights") if every raw weight is zero.
void observation_weights(std::span<ArrivalObservation> observations, const ArrivalProfile& profile,
                         double cycle_length_s);

}  // namespace sigdemand
