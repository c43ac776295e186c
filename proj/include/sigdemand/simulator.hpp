// Seeded synthetic intersection: arrivals, lane-level queueing with a
// simplified car-following rule, CV sampling and ground-truth tables.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sigdemand/domain.hpp"

namespace sigdemand {

enum class ArrivalPattern { Random, Platoon };

struct PlatoonSpec {
  double window_start_frac = 0.0;
  double window_len_frac = 0.3;
  double inside_mass = 0.8;
};

/// Mean vehicles per cycle. With an explicit sequence, cycle k uses
/// sequence[(k - 1) % size]; otherwise
/// mean * (1 + amplitude * sin(2 pi (k - 1) / period + shift)) + N(0, noise).
struct DemandSpec {
  double mean_veh = 0.0;
  double amplitude = 0.0;
  double period_cycles = 20.0;
  double phase_shift_rad = 0.0;
  double noise_std_veh = 0.0;
  std::vector<double> sequence;
};

struct ScenarioPhase {
  PhaseConfig config;
  /// Red start of the first cycle relative to start_time_s.
  double red_offset_s = 0.0;
  double green_s = 0.0;
  DemandSpec demand;
  ArrivalPattern pattern = ArrivalPattern::Random;
  PlatoonSpec platoon;
};

struct ScenarioConfig {
  std::string name = "scenario";
  double cycle_length_s = 150.0;
  int cycle_count = 80;
  double start_time_s = 100.0;
  std::vector<ScenarioPhase> phases;
  double sat_headway_s = 1.9;
  double detection_range_m = 1000.0;
  double report_interval_s = 3.0;
  double position_noise_std_m = 0.0;
  double penetration = 1.0;
  std::uint64_t seed = 1;
  double time_step_s = 0.1;
  /// Extra signal cycles simulated so every vehicle clears the stopline.
  int max_flush_cycles = 40;
};

/// Throws Error("invalid_scenario").
void validate_scenario(const ScenarioConfig& scenario);

/// Fixed-time plan with red first, green at the end of each cycle.
ValidatedPlan build_plan(const ScenarioConfig& scenario, int extra_cycles = 0);

/// Expected vehicles per cycle before Poisson sampling, one entry per cycle.
std::vector<double> cycle_demand_means(const ScenarioPhase& phase, int cycle_count,
                                       std::uint64_t seed);

struct PhaseArrivals {
  PhaseId phase_id = 0;
  /// Free-flow stopline arrival times, ascending.
  std::vector<double> times_s;
};

std::vector<PhaseArrivals> generate_arrivals(const ScenarioConfig& scenario,
                                             const ValidatedPlan& plan);

struct GroundTruthRow {
  PhaseId phase_id = 0;
  int cycle_index = 0;
  int demand = 0;
  int volume = 0;
  int initial_queue = 0;
};

struct GroundTruth {
  std::vector<GroundTruthRow> rows;
  /// Initial queue of cycle K + 1, per phase in plan order.
  std::vector<int> final_queue;

  const GroundTruthRow* find(PhaseId phase_id, int cycle_index) const;
};

struct VehicleRecord {
  std::string vehicle_id;
  PhaseId phase_id = 0;
  int lane = 0;
  double arrival_s = 0.0;
  double crossing_s = 0.0;
  int stops = 0;
};

struct SimulationResult {
  ValidatedPlan plan;
  std::vector<Trajectory> trajectories;
  std::vector<VehicleRecord> vehicles;
  GroundTruth truth;
};

/// Simulates every vehicle; trajectories cover the whole population.
SimulationResult simulate_intersection(const ScenarioConfig& scenario);
SimulationResult simulate_intersection(const ScenarioConfig& scenario,
                                       std::span<const PhaseArrivals> arrivals);

/// Independent Bernoulli(p) draw per vehicle in population order. The draw
/// depends only on the seed, so samples are nested in p.
std::vector<Trajectory> sample_cvs(std::span<const Trajectory> population, double penetration,
                                   std::uint64_t seed);

/// Two-ring, eight-phase, 150 s fixed-time intersection used for the
/// penetration experiments.
ScenarioConfig reference_scenario();

}  // namespace sigdemand
