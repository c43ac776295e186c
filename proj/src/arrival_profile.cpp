#include "sigdemand/arrival_profile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sigdemand {

ArrivalProfile ArrivalProfile::uniform(PhaseId phase_id, int bin_count) {
  ArrivalProfile p;
  p.phase_id = phase_id;
  p.bin_values.assign(static_cast<std::size_t>(std::max(bin_count, 1)), 1.0);
  return p;
}

double ArrivalProfile::cumulative_fraction(double tau) const {
  const double n = static_cast<double>(bin_values.size());
  const double pos = std::clamp(tau, 0.0, 1.0) * n;
  const auto full = static_cast<std::size_t>(std::min(std::floor(pos), n));
  double acc = 0.0;
  for (std::size_t i = 0; i < full; ++i) acc += bin_values[i];
  if (full < bin_values.size()) acc += (pos - static_cast<double>(full)) * bin_values[full];
  return acc / n;
}

ArrivalProfile build_profile(PhaseId phase_id, std::span<const HistoricalArrival> history,
                             int bin_count, double floor_epsilon) {
  if (bin_count < 1) throw Error("invalid_argument", "profile bin_count must be >= 1");
  ArrivalProfile profile = ArrivalProfile::uniform(phase_id, bin_count);
  profile.floor_epsilon = floor_epsilon;

  std::vector<double> counts(static_cast<std::size_t>(bin_count), 0.0);
  double total = 0.0;
  for (const auto& h : history) {
    if (!(h.cycle_length_s > 0.0)) continue;
    const double tau = h.arrival_offset_s / h.cycle_length_s;
    if (!(tau >= 0.0) || tau > 1.0) continue;
    const auto bin = std::min(static_cast<std::size_t>(tau * bin_count), counts.size() - 1);
    counts[bin] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) return profile;

  const double mean = total / bin_count;
  for (auto& c : counts) c = std::max(c / mean, floor_epsilon);
  const double renorm = std::accumulate(counts.begin(), counts.end(), 0.0) / bin_count;
  for (auto& c : counts) c /= renorm;
  profile.bin_values = std::move(counts);
  return profile;
}

double cumulative_arrivals(const ArrivalProfile& profile, double t_s, double cycle_length_s) {
  if (!(cycle_length_s > 0.0) || t_s < 0.0 || t_s > cycle_length_s) {
    std::ostringstream msg;
    msg << "t = " << t_s << " s outside [0, " << cycle_length_s << "]";
    throw Error("out_of_range", msg.str());
  }
  if (t_s == cycle_length_s) return cycle_length_s;
  return cycle_length_s * profile.cumulative_fraction(t_s / cycle_length_s);
}

void observation_weights(std::span<ArrivalObservation> observations, const ArrivalProfile& profile,
                         double cycle_length_s) {
  if (observations.empty()) return;
  double sum = 0.0;
  for (auto& obs : observations) {
    const double t = std::clamp(obs.arrival_offset_s, 0.0, cycle_length_s);
    obs.raw_weight = cumulative_arrivals(profile, t, cycle_length_s);
    sum += obs.raw_weight;
  }
  if (!(sum > 0.0)) throw Error("zero_weights", "all observation weights are zero");
  const double x = static_cast<double>(observations.size());
  for (auto& obs : observations) obs.norm_weight = obs.raw_weight * x / sum;
}

}  // namespace sigdemand
