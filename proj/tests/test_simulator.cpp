#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "sigdemand/io.hpp"
#include "sigdemand/simulator.hpp"

using namespace sigdemand;

namespace {

ScenarioConfig single_phase(double demand, int cycles = 30, std::uint64_t seed = 3) {
  ScenarioConfig s;
  s.cycle_length_s = 100.0;
  s.cycle_count = cycles;
  s.start_time_s = 0.0;
  s.seed = seed;
  ScenarioPhase p;
  p.config.phase_id = 1;
  p.config.lane_count = 1;
  p.config.jam_spacing_m = 7.0;
  p.config.free_flow_speed_mps = 14.0;
  p.green_s = 40.0;
  p.demand.mean_veh = demand;
  s.phases.push_back(p);
  return s;
}

std::vector<ScenarioConfig> scenario_family() {
  std::vector<ScenarioConfig> out;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ScenarioConfig r = reference_scenario();
    r.seed = seed;
    r.cycle_count = 30;
    out.push_back(r);
  }
  ScenarioConfig wavy = reference_scenario();
  wavy.cycle_count = 40;
  for (auto& p : wavy.phases) {
    p.demand.amplitude = 0.3;
    p.demand.noise_std_veh = 3.0;
    p.demand.phase_shift_rad = 0.5 * p.config.phase_id;
  }
  out.push_back(wavy);
  out.push_back(single_phase(24.0, 60, 8));
  out.push_back(single_phase(34.0, 40, 9));
  return out;
}

int queue_after(const GroundTruth& truth, const ValidatedPlan& plan, std::size_t phase_index,
                int k) {
  const PhaseId id = plan.phases()[phase_index].config.phase_id;
  if (const auto* r = truth.find(id, k + 1)) return r->initial_queue;
  return truth.final_queue[phase_index];
}

}  // namespace

TEST(Demand, SequenceAndSinusoid) {
  ScenarioPhase p;
  p.config.phase_id = 2;
  p.demand.sequence = {10, 20, 30};
  EXPECT_EQ(cycle_demand_means(p, 5, 1), (std::vector<double>{10, 20, 30, 10, 20}));

  p.demand.sequence.clear();
  p.demand.mean_veh = 40.0;
  p.demand.amplitude = 0.25;
  p.demand.period_cycles = 8.0;
  p.demand.phase_shift_rad = 0.3;
  const auto m = cycle_demand_means(p, 16, 1);
  for (int k = 1; k <= 16; ++k) {
    EXPECT_NEAR(m[k - 1], 40.0 * (1.0 + 0.25 * std::sin(2.0 * M_PI * (k - 1) / 8.0 + 0.3)), 1e-12);
  }
}

TEST(Arrivals, MeanDemandWithinThreeStandardErrors) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = single_phase(30.0, 100, seed);
    const auto arr = generate_arrivals(s, build_plan(s));
    const double mean = static_cast<double>(arr[0].times_s.size()) / 100.0;
    EXPECT_NEAR(mean, 30.0, 3.0 * std::sqrt(30.0 / 100.0)) << "seed " << seed;
  }
}

TEST(Arrivals, PlatoonMassInsideWindow) {
  auto s = single_phase(40.0, 100);
  s.phases[0].pattern = ArrivalPattern::Platoon;
  s.phases[0].platoon = {0.2, 0.3, 0.8};
  const auto plan = build_plan(s);
  const auto arr = generate_arrivals(s, plan);
  int inside = 0;
  for (double t : arr[0].times_s) {
    const double frac = std::fmod(t, 100.0) / 100.0;
    if (frac >= 0.2 && frac < 0.5) ++inside;
  }
  const double n = static_cast<double>(arr[0].times_s.size());
  // Inside probability is 0.8 + 0.2 * 0.3 counting the background share.
  const double p = 0.86;
  EXPECT_GE(inside / n, 0.8 - 3.0 * std::sqrt(p * (1 - p) / n));
  EXPECT_NEAR(inside / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Arrivals, ZeroDemandHasNoVehicles) {
  const auto s = single_phase(0.0, 10);
  EXPECT_TRUE(generate_arrivals(s, build_plan(s))[0].times_s.empty());
  const auto r = simulate_intersection(s);
  EXPECT_TRUE(r.vehicles.empty());
  for (const auto& row : r.truth.rows) EXPECT_EQ(row.demand, 0);
}

TEST(Scenario, Validation) {
  auto s = single_phase(10.0);
  EXPECT_NO_THROW(validate_scenario(s));
  s.sat_headway_s = 0.5;  // below jam spacing / free-flow speed
  EXPECT_THROW(validate_scenario(s), Error);
  s = single_phase(10.0);
  s.phases[0].green_s = 100.0;
  EXPECT_THROW(validate_scenario(s), Error);
  s = single_phase(10.0);
  s.penetration = 1.5;
  EXPECT_THROW(validate_scenario(s), Error);
  EXPECT_NO_THROW(validate_scenario(reference_scenario()));
}

TEST(Simulation, ConservationOnEveryCycle) {
  for (const auto& s : scenario_family()) {
    const auto r = simulate_intersection(s);
    for (std::size_t z = 0; z < r.plan.phases().size(); ++z) {
      const PhaseId id = r.plan.phases()[z].config.phase_id;
      int demand = 0, volume = 0;
      for (int k = 1; k <= s.cycle_count; ++k) {
        const auto* row = r.truth.find(id, k);
        ASSERT_NE(row, nullptr);
        EXPECT_EQ(row->demand, row->volume - row->initial_queue + queue_after(r.truth, r.plan, z, k))
            << s.name << " phase " << id << " cycle " << k;
        demand += row->demand;
        volume += row->volume;
      }
      EXPECT_EQ(demand, volume + r.truth.final_queue[z] - r.truth.find(id, 1)->initial_queue);
    }
  }
}

TEST(Simulation, UndersaturatedDemandEqualsVolume) {
  const auto s = single_phase(8.0, 40);
  const auto r = simulate_intersection(s);
  for (const auto& row : r.truth.rows) {
    EXPECT_EQ(row.initial_queue, 0);
    EXPECT_EQ(row.demand, row.volume);
  }
}

TEST(Simulation, OversaturatedCycleCarriesQueue) {
  // Green 40 s at 1.9 s headway serves at most 21 vehicles per cycle.
  auto s = single_phase(0.0, 3);
  s.phases[0].demand.sequence = {30, 5, 5};
  std::vector<PhaseArrivals> arr(1);
  arr[0].phase_id = 1;
  for (int i = 0; i < 30; ++i) arr[0].times_s.push_back(1.0 + i * 2.0);
  for (int i = 0; i < 5; ++i) arr[0].times_s.push_back(101.0 + i * 10.0);
  const auto r = simulate_intersection(s, arr);
  const auto* c1 = r.truth.find(1, 1);
  const auto* c2 = r.truth.find(1, 2);
  EXPECT_EQ(c1->demand, 30);
  EXPECT_EQ(c1->initial_queue, 0);
  EXPECT_GT(c2->initial_queue, 0);
  EXPECT_EQ(c1->demand, c1->volume + c2->initial_queue);
}

TEST(Simulation, DischargeRespectsHeadwayAndGreen) {
  const auto s = reference_scenario();
  const auto r = simulate_intersection(s);
  std::map<std::pair<PhaseId, int>, std::vector<double>> lanes;
  for (const auto& v : r.vehicles) {
    lanes[{v.phase_id, v.lane}].push_back(v.crossing_s);
    const int k = locate_cycle(r.plan, v.phase_id, v.crossing_s);
    const CycleTiming* c = r.plan.cycle(v.phase_id, k);
    EXPECT_GE(v.crossing_s, c->green_start_s);
    EXPECT_LE(v.crossing_s, c->green_end_s());
    EXPECT_GE(v.crossing_s, v.arrival_s);
  }
  for (auto& [key, xs] : lanes) {
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i) EXPECT_GE(xs[i] - xs[i - 1], s.sat_headway_s - 1e-9);
  }
}

TEST(Simulation, StandingVehiclesOccupyWholeSlots) {
  auto s = reference_scenario();
  s.cycle_count = 20;
  const auto r = simulate_intersection(s);
  int standing = 0;
  for (const auto& t : r.trajectories) {
    const double l0 = r.plan.phase(t.phase_id).config.jam_spacing_m;
    for (std::size_t i = 1; i < t.points.size(); ++i) {
      const auto& a = t.points[i - 1];
      const auto& b = t.points[i];
      if (a.distance_to_stopline_m != b.distance_to_stopline_m || b.distance_to_stopline_m <= 0) continue;
      ++standing;
      const double slot = b.distance_to_stopline_m / l0;
      EXPECT_GE(slot, 1.0 - 1e-9);
      EXPECT_NEAR(slot, std::round(slot), 1e-6);
    }
  }
  EXPECT_GT(standing, 1000);
}

TEST(Simulation, TrajectoriesWellFormed) {
  auto s = reference_scenario();
  s.cycle_count = 10;
  const auto r = simulate_intersection(s);
  EXPECT_EQ(r.trajectories.size(), r.vehicles.size());
  for (const auto& t : r.trajectories) {
    ASSERT_NO_THROW(validate_trajectory(t));
    EXPECT_LE(t.points.front().distance_to_stopline_m, s.detection_range_m + 1e-9);
    EXPECT_LE(t.points.back().distance_to_stopline_m, 0.0);
  }
}

TEST(Simulation, Deterministic) {
  auto s = reference_scenario();
  s.cycle_count = 12;
  const auto a = simulate_intersection(s);
  const auto b = simulate_intersection(s);
  std::ostringstream ta, tb, ga, gb;
  io::write_trajectories(ta, a.trajectories);
  io::write_trajectories(tb, b.trajectories);
  io::write_truth(ga, a.truth);
  io::write_truth(gb, b.truth);
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(ga.str(), gb.str());
  s.seed += 1;
  std::ostringstream tc;
  io::write_trajectories(tc, simulate_intersection(s).trajectories);
  EXPECT_NE(ta.str(), tc.str());
}

TEST(Sampling, Extremes) {
  auto s = reference_scenario();
  s.cycle_count = 5;
  const auto r = simulate_intersection(s);
  EXPECT_EQ(sample_cvs(r.trajectories, 1.0, 9).size(), r.trajectories.size());
  EXPECT_TRUE(sample_cvs(r.trajectories, 0.0, 9).empty());
  EXPECT_THROW(sample_cvs(r.trajectories, -0.1, 9), Error);
}

TEST(Sampling, BinomialCountAndNesting) {
  std::vector<Trajectory> population(1000);
  for (std::size_t i = 0; i < population.size(); ++i) population[i].vehicle_id = std::to_string(i);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto cvs = sample_cvs(population, 0.1, seed);
    // Central 99% interval of Binomial(1000, 0.1).
    EXPECT_GE(cvs.size(), 76u);
    EXPECT_LE(cvs.size(), 125u);
    const auto wider = sample_cvs(population, 0.3, seed);
    std::size_t j = 0;
    for (const auto& t : cvs) {
      while (j < wider.size() && wider[j].vehicle_id != t.vehicle_id) ++j;
      EXPECT_LT(j, wider.size()) << "sample at 10% not contained in sample at 30%";
    }
  }
  EXPECT_EQ(sample_cvs(population, 0.1, 4).size(), sample_cvs(population, 0.1, 4).size());
}
