// Test fixtures: hand-built trajectories and plans, random posterior
// instances and the brute-force maximizers used as oracles.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "sigdemand/domain.hpp"
#include "sigdemand/estimators.hpp"
#include "sigdemand/prior.hpp"

namespace sigdemand::testing {

using Sample = std::tuple<double, double, double>;  // t, distance, speed

inline Trajectory make_trajectory(std::vector<Sample> samples, PhaseId phase = 1,
                                  std::string id = "v1") {
  Trajectory t;
  t.vehicle_id = std::move(id);
  t.phase_id = phase;
  for (const auto& [ts, d, v] : samples) t.points.push_back({ts, d, v});
  return t;
}

/// Cruise at `speed` from (t0, d0) until reaching `d_end`, one sample per dt.
inline void cruise(std::vector<Sample>& out, double t0, double d0, double speed, double d_end,
                   double dt = 1.0) {
  for (double t = t0, d = d0; d > d_end - 1e-9; t += dt, d -= speed * dt) out.emplace_back(t, d, speed);
}

/// Standing still at d over [t0, t1].
inline void hold(std::vector<Sample>& out, double t0, double t1, double d, double dt = 1.0) {
  for (double t = t0; t <= t1 + 1e-9; t += dt) out.emplace_back(t, d, 0.0);
}

/// Equal cycles of length c with the green at the end, phases sharing one
/// timing.
inline ValidatedPlan uniform_plan(std::vector<PhaseConfig> configs, int cycles, double c,
                                  double green, double start = 0.0) {
  SignalPlan plan;
  for (const auto& cfg : configs) {
    PhaseSchedule s;
    s.config = cfg;
    for (int k = 1; k <= cycles; ++k) {
      const double red = start + (k - 1) * c;
      s.cycles.push_back({k, red, red + c - green, green, c});
    }
    plan.phases.push_back(std::move(s));
  }
  return validate_signal_plan(std::move(plan));
}

inline PhaseConfig phase_config(PhaseId id, int lanes = 1, double jam = 6.0, double vf = 12.0) {
  PhaseConfig c;
  c.phase_id = id;
  c.lane_count = lanes;
  c.jam_spacing_m = jam;
  c.free_flow_speed_mps = vf;
  return c;
}

struct PosteriorInstance {
  std::vector<PhaseStats> stats;
  PriorSpec prior;
  std::vector<double> cycle_lengths;
};

/// Random feasible instance: prior means on the simplex, 0..max_obs
/// observations per phase (at least one phase observed), Lambda values
/// inside the cycle.
inline PosteriorInstance random_instance(std::mt19937_64& rng, int z, int max_obs = 6,
                                         double sat_headway = 2.0) {
  PosteriorInstance inst;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::gamma_distribution<double> gamma(2.0, 1.0);
  std::uniform_int_distribution<int> obs_count(0, max_obs);
  std::uniform_int_distribution<int> lanes(1, 3);
  std::uniform_int_distribution<int> position(1, 25);
  const double c = 100.0 + 60.0 * unit(rng);

  std::vector<double> mu(z);
  double total = 0.0;
  for (auto& m : mu) total += (m = 0.2 + gamma(rng));
  for (auto& m : mu) m /= total;

  bool any = false;
  double lane_sum = 0.0;
  for (int i = 0; i < z; ++i) {
    const int u = lanes(rng);
    lane_sum += u;
    const int x = obs_count(rng);
    std::vector<ArrivalObservation> obs(static_cast<std::size_t>(x));
    double w_sum = 0.0;
    for (auto& o : obs) {
      o.vehicles_ahead = position(rng);
      o.raw_weight = c * (0.02 + 0.98 * unit(rng));
      w_sum += o.raw_weight;
    }
    for (auto& o : obs) o.norm_weight = o.raw_weight * x / w_sum;
    inst.stats.push_back(sufficient_stats(i + 1, obs, u));
    any = any || x > 0;
    const double sd = 0.02 + 0.15 * unit(rng);
    inst.prior.phases.push_back({i + 1, mu[static_cast<std::size_t>(i)], sd * sd});
    inst.cycle_lengths.push_back(c);
  }
  if (!any) {
    ArrivalObservation o;
    o.vehicles_ahead = position(rng);
    o.raw_weight = 0.5 * c;
    o.norm_weight = 1.0;
    inst.stats[0] = sufficient_stats(1, std::span<const ArrivalObservation>(&o, 1),
                                     inst.stats[0].lane_count);
  }
  inst.prior.lambda0_upper = lane_sum / sat_headway;
  return inst;
}

struct GridOptimum {
  double value = -std::numeric_limits<double>::infinity();
  double lambda0 = 0.0;
  std::vector<double> shares;
};

/// Dense (lambda0, alpha_1) grid for Z = 2 over the feasible box.
inline GridOptimum grid_max_two_phase(const PosteriorInstance& inst, int steps = 400) {
  GridOptimum best;
  const double upper = inst.prior.lambda0_upper;
  for (int i = 1; i <= steps; ++i) {
    const double lambda0 = upper * i / steps;
    for (int j = 0; j <= steps; ++j) {
      const double a = static_cast<double>(j) / steps;
      const std::vector<double> shares{a, 1.0 - a};
      const double v = log_posterior(lambda0, shares, inst.stats, inst.prior);
      if (v > best.value) best = {v, lambda0, shares};
    }
  }
  return best;
}

/// Simplex lattice with `steps` divisions; for each share vector the
/// lambda0 maximum is the clamped stationary point sum N / sum W alpha.
inline GridOptimum grid_max_simplex(const PosteriorInstance& inst, int steps) {
  const int z = static_cast<int>(inst.stats.size());
  GridOptimum best;
  std::vector<int> idx(static_cast<std::size_t>(z), 0);
  double n_total = 0.0;
  for (const auto& s : inst.stats) n_total += s.weighted_count;

  const auto visit = [&](const std::vector<double>& shares) {
    double w = 0.0;
    for (int i = 0; i < z; ++i) w += inst.stats[static_cast<std::size_t>(i)].weighted_exposure * shares[static_cast<std::size_t>(i)];
    double lambda0 = w > 0.0 ? n_total / w : inst.prior.lambda0_upper;
    lambda0 = std::clamp(lambda0, inst.prior.lambda0_upper * 1e-9, inst.prior.lambda0_upper);
    const double v = log_posterior(lambda0, shares, inst.stats, inst.prior);
    if (v > best.value) best = {v, lambda0, shares};
  };

  // Enumerate compositions of `steps` into z parts.
  std::vector<double> shares(static_cast<std::size_t>(z));
  const auto recurse = [&](auto&& self, int pos, int left) -> void {
    if (pos == z - 1) {
      idx[static_cast<std::size_t>(pos)] = left;
      for (int i = 0; i < z; ++i) shares[static_cast<std::size_t>(i)] = static_cast<double>(idx[static_cast<std::size_t>(i)]) / steps;
      visit(shares);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      idx[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, left - v);
    }
  };
  recurse(recurse, 0, steps);
  return best;
}

}  // namespace sigdemand::testing
