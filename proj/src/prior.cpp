#include "sigdemand/prior.hpp"

#include <algorithm>
#include <cmath>

namespace sigdemand {

const PhasePrior& PriorSpec::phase(PhaseId id) const {
  for (const auto& p : phases) {
    if (p.phase_id == id) return p;
  }
  throw Error("unknown_phase", "no prior for phase " + std::to_string(id));
}

AlphaPrior build_alpha_prior(std::span<const PhaseCountSeries> series, double min_stddev,
                             int min_usable_bins) {
  if (series.empty()) throw Error("invalid_argument", "no phases for prior");
  const std::size_t z_count = series.size();
  std::size_t bins = 0;
  for (const auto& s : series) bins = std::max(bins, s.counts.size());

  auto count_at = [](const PhaseCountSeries& s, std::size_t i) {
    return i < s.counts.size() ? s.counts[i] : 0;
  };

  std::vector<std::vector<double>> shares(z_count);
  for (std::size_t i = 0; i < bins; ++i) {
    long total = 0;
    for (const auto& s : series) total += count_at(s, i);
    if (total <= 0) continue;
    for (std::size_t z = 0; z < z_count; ++z) {
      shares[z].push_back(static_cast<double>(count_at(series[z], i)) / static_cast<double>(total));
    }
  }

  AlphaPrior prior;
  prior.sample_count = static_cast<int>(shares.front().size());
  prior.phases.resize(z_count);
  for (std::size_t z = 0; z < z_count; ++z) prior.phases[z].phase_id = series[z].phase_id;

  if (prior.sample_count < std::max(min_usable_bins, 2)) {
    prior.flat_fallback = true;
    for (auto& p : prior.phases) {
      p.mean_share = 1.0 / static_cast<double>(z_count);
      p.variance = kFlatFallbackStddev * kFlatFallbackStddev;
    }
    return prior;
  }

  const double n = static_cast<double>(prior.sample_count);
  for (std::size_t z = 0; z < z_count; ++z) {
    double mean = 0.0;
    for (double a : shares[z]) mean += a;
    mean /= n;
    double ss = 0.0;
    for (double a : shares[z]) ss += (a - mean) * (a - mean);
    prior.phases[z].mean_share = mean;
    prior.phases[z].variance = std::max(ss / (n - 1.0), min_stddev * min_stddev);
  }
  return prior;
}

double lambda0_support(std::span<const PhaseConfig> phases, double sat_headway_s) {
  if (!(sat_headway_s > 0.0)) throw Error("invalid_argument", "saturation headway must be > 0");
  int lanes = 0;
  for (const auto& p : phases) lanes += p.lane_count;
  return static_cast<double>(lanes) / sat_headway_s;
}

PriorSpec make_prior(AlphaPrior alpha, double lambda0_upper) {
  if (!(lambda0_upper > 0.0)) throw Error("invalid_argument", "lambda0 upper bound must be > 0");
  PriorSpec spec;
  spec.phases = std::move(alpha.phases);
  spec.lambda0_upper = lambda0_upper;
  spec.sample_count = alpha.sample_count;
  spec.flat_fallback = alpha.flat_fallback;
  return spec;
}

}  // namespace sigdemand
