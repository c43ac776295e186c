// Per-lane initial queue: flow-conservation recursion clamped into the
// bounds implied by the CV types seen in the previous and current cycle.
#pragma once

#include <limits>
#include <span>
#include <vector>

#include "sigdemand/domain.hpp"
#include "sigdemand/trajectory_prep.hpp"

namespace sigdemand {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct InitialQueueState {
  PhaseId phase_id = 0;
  int cycle_index = 0;
  double conservation_estimate = 0.0;
  double lower_bound = 0.0;
  double upper_bound = kUnbounded;
  double final_estimate = 0.0;
  /// CV evidence gave lower > upper; the lower bound was dropped to 0.
  bool inconsistent_bounds = false;
};

/// max(0, q + lambda C - s G), all per lane.
double conservation_estimate(double prev_queue_veh, double prev_lane_rate_vps,
                             double prev_cycle_s, double sat_rate_vps, double prev_green_s);

/// CV evidence feeding the bounds of cycle k.
struct QueueEvidence {
  /// Second-stop queuing positions of Type 2 CVs attributed to k-1.
  std::vector<int> type2_secondary_prev;
  /// Whether any Type 3 CV was attributed to k-1.
  bool type3_prev = false;
  /// Queuing positions of Type 1 CVs attributed to k.
  std::vector<int> type1_positions_current;
};

struct QueueBounds {
  double lower = 0.0;
  double upper = kUnbounded;
  bool inconsistent = false;
};

/// Lower bound from Type 2 second stops, upper bound from the smallest of
/// the Type 1 position bound and the Type 3 (undersaturated) bound.
/// Inconsistent evidence (lower > upper) widens to [0, upper].
QueueBounds cv_bounds(const QueueEvidence& evidence);

double finalize_initial_queue(double conservation, const QueueBounds& bounds);

/// n' = n - round(q); negative results clamp to 0 and are flagged.
std::vector<ArrivalObservation> adjust_observations(std::span<const ArrivalObservation> observations,
                                                    double initial_queue_veh);

}  // namespace sigdemand
