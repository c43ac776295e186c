#include "sigdemand/initial_queue.hpp"

#include <algorithm>
#include <cmath>

namespace sigdemand {

double conservation_estimate(double prev_queue_veh, double prev_lane_rate_vps,
                             double prev_cycle_s, double sat_rate_vps, double prev_green_s) {
  const double accumulated = prev_queue_veh + prev_lane_rate_vps * prev_cycle_s;
  const double dissipated = sat_rate_vps * prev_green_s;
  return accumulated <= dissipated ? 0.0 : accumulated - dissipated;
}

QueueBounds cv_bounds(const QueueEvidence& evidence) {
  QueueBounds b;
  if (!evidence.type2_secondary_prev.empty()) {
    b.lower = *std::max_element(evidence.type2_secondary_prev.begin(),
                                evidence.type2_secondary_prev.end());
  }
  const double upper_type3 = evidence.type3_prev ? 0.0 : kUnbounded;
  double upper_type1 = kUnbounded;
  if (!evidence.type1_positions_current.empty()) {
    upper_type1 = *std::min_element(evidence.type1_positions_current.begin(),
                                    evidence.type1_positions_current.end());
  }
  b.upper = std::min(upper_type1, upper_type3);
  if (b.lower > b.upper) {
    b.inconsistent = true;
    b.lower = 0.0;
  }
  return b;
}

double finalize_initial_queue(double conservation, const QueueBounds& bounds) {
  if (conservation < bounds.lower) return bounds.lower;
  if (conservation > bounds.upper) return bounds.upper;
  return conservation;
}

std::vector<ArrivalObservation> adjust_observations(std::span<const ArrivalObservation> observations,
                                                    double initial_queue_veh) {
  const int shift = static_cast<int>(std::lround(initial_queue_veh));
  std::vector<ArrivalObservation> out(observations.begin(), observations.end());
  if (shift == 0) return out;
  for (auto& obs : out) {
    obs.vehicles_ahead -= shift;
    if (obs.vehicles_ahead < 0) {
      obs.vehicles_ahead = 0;
      obs.clamped = true;
    }
  }
  return out;
}

}  // namespace sigdemand
