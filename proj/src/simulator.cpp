#include "sigdemand/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace sigdemand {

const GroundTruthRow* GroundTruth::find(PhaseId phase_id, int cycle_index) const {
  for (const auto& r : rows) {
    if (r.phase_id == phase_id && r.cycle_index == cycle_index) return &r;
  }
  return nullptr;
}

void validate_scenario(const ScenarioConfig& s) {
  auto fail = [](const std::string& msg) { throw Error("invalid_scenario", msg); };
  if (s.phases.empty()) fail("scenario has no phases");
  if (!(s.cycle_length_s > 0.0) || !std::isfinite(s.cycle_length_s)) fail("cycle_length_s must be > 0");
  if (s.cycle_count < 1) fail("cycle_count must be >= 1");
  if (!std::isfinite(s.start_time_s)) fail("start_time_s must be finite");
  if (!(s.time_step_s > 0.0)) fail("time_step_s must be > 0");
  if (!(s.report_interval_s > 0.0)) fail("report_interval_s must be > 0");
  if (!(s.detection_range_m > 0.0)) fail("detection_range_m must be > 0");
  if (!(s.position_noise_std_m >= 0.0)) fail("position_noise_std_m must be >= 0");
  if (!(s.penetration >= 0.0 && s.penetration <= 1.0)) fail("penetration must lie in [0, 1]");
  if (s.max_flush_cycles < 1) fail("max_flush_cycles must be >= 1");

  std::set<PhaseId> ids;
  for (const auto& p : s.phases) {
    const std::string tag = "phase " + std::to_string(p.config.phase_id) + ": ";
    if (!ids.insert(p.config.phase_id).second) fail(tag + "duplicate phase id");
    if (p.config.lane_count < 1) fail(tag + "lane_count must be >= 1");
    if (!(p.config.jam_spacing_m > 0.0)) fail(tag + "jam_spacing_m must be > 0");
    if (!(p.config.free_flow_speed_mps > 0.0)) fail(tag + "free_flow_speed_mps must be > 0");
    if (!(p.green_s > 0.0 && p.green_s < s.cycle_length_s)) fail(tag + "green must lie in (0, C)");
    if (!std::isfinite(p.red_offset_s)) fail(tag + "red_offset_s must be finite");
    if (!(s.sat_headway_s > p.config.jam_spacing_m / p.config.free_flow_speed_mps)) {
      fail(tag + "sat_headway_s must exceed jam_spacing_m / free_flow_speed_mps");
    }
    if (!(p.demand.mean_veh >= 0.0)) fail(tag + "demand mean must be >= 0");
    for (double v : p.demand.sequence) {
      if (!(v >= 0.0)) fail(tag + "demand sequence entries must be >= 0");
    }
    if (!(p.demand.period_cycles > 0.0)) fail(tag + "demand period must be > 0");
    if (!(p.demand.noise_std_veh >= 0.0)) fail(tag + "demand noise must be >= 0");
    if (p.pattern == ArrivalPattern::Platoon) {
      const auto& w = p.platoon;
      if (!(w.inside_mass > 0.0 && w.inside_mass <= 1.0)) fail(tag + "inside_mass must lie in (0, 1]");
      if (!(w.window_start_frac >= 0.0 && w.window_len_frac > 0.0 &&
            w.window_start_frac + w.window_len_frac <= 1.0 + 1e-12)) {
        fail(tag + "platoon window must lie inside the cycle");
      }
    }
  }
}

ValidatedPlan build_plan(const ScenarioConfig& scenario, int extra_cycles) {
  SignalPlan plan;
  const double c = scenario.cycle_length_s;
  for (const auto& p : scenario.phases) {
    PhaseSchedule sched;
    sched.config = p.config;
    const double first = scenario.start_time_s + p.red_offset_s;
    for (int k = 1; k <= scenario.cycle_count + extra_cycles; ++k) {
      CycleTiming ct;
      ct.k = k;
      ct.red_start_s = first + (k - 1) * c;
      ct.green_start_s = ct.red_start_s + c - p.green_s;
      ct.green_duration_s = p.green_s;
      ct.cycle_length_s = c;
      sched.cycles.push_back(ct);
    }
    plan.phases.push_back(std::move(sched));
  }
  return validate_signal_plan(std::move(plan));
}

namespace {

std::mt19937_64 phase_rng(std::uint64_t seed, PhaseId phase_id, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(phase_id), stream};
  return std::mt19937_64(seq);
}

}  // namespace

std::vector<double> cycle_demand_means(const ScenarioPhase& phase, int cycle_count,
                                       std::uint64_t seed) {
  std::vector<double> means(static_cast<std::size_t>(cycle_count));
  const auto& d = phase.demand;
  if (!d.sequence.empty()) {
    for (int k = 0; k < cycle_count; ++k) means[k] = d.sequence[k % d.sequence.size()];
    return means;
  }
  auto rng = phase_rng(seed, phase.config.phase_id, 11);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int k = 0; k < cycle_count; ++k) {
    const double wave = std::sin(2.0 * std::numbers::pi * k / d.period_cycles + d.phase_shift_rad);
    double m = d.mean_veh * (1.0 + d.amplitude * wave);
    if (d.noise_std_veh > 0.0) m += d.noise_std_veh * noise(rng);
    means[k] = std::max(0.0, m);
  }
  return means;
}

std::vector<PhaseArrivals> generate_arrivals(const ScenarioConfig& scenario,
                                             const ValidatedPlan& plan) {
  std::vector<PhaseArrivals> out;
  for (const auto& p : scenario.phases) {
    PhaseArrivals arr;
    arr.phase_id = p.config.phase_id;
    const auto means = cycle_demand_means(p, scenario.cycle_count, scenario.seed);
    auto rng = phase_rng(scenario.seed, p.config.phase_id, 23);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 1; k <= scenario.cycle_count; ++k) {
      const CycleTiming* ct = plan.cycle(p.config.phase_id, k);
      const double mean = means[static_cast<std::size_t>(k - 1)];
      if (mean <= 0.0) continue;
      std::poisson_distribution<int> count(mean);
      const int n = count(rng);
      for (int i = 0; i < n; ++i) {
        double frac = unit(rng);
        if (p.pattern == ArrivalPattern::Platoon && unit(rng) < p.platoon.inside_mass) {
          frac = p.platoon.window_start_frac + p.platoon.window_len_frac * unit(rng);
        }
        arr.times_s.push_back(ct->red_start_s + std::min(frac, 1.0 - 1e-12) * ct->cycle_length_s);
      }
    }
    std::sort(arr.times_s.begin(), arr.times_s.end());
    out.push_back(std::move(arr));
  }
  return out;
}

namespace {

class SignalClock {
 public:
  SignalClock(double first_red_s, double cycle_s, double green_s)
      : first_red_(first_red_s), cycle_(cycle_s), red_(cycle_s - green_s) {}

  long cycle_of(double t) const { return static_cast<long>(std::floor((t - first_red_) / cycle_)); }
  double green_start(long m) const { return first_red_ + static_cast<double>(m) * cycle_ + red_; }
  double green_end(long m) const { return first_red_ + static_cast<double>(m + 1) * cycle_; }

  double red_start(long m) const { return first_red_ + static_cast<double>(m) * cycle_; }

  /// Time at which queue ranks are read: t itself during red, the start of
  /// the current green during green. Ranks therefore only shrink at red start.
  double rank_time(double t) const {
    const double g = green_start(cycle_of(t));
    return t < g ? t : g;
  }

 private:
  double first_red_;
  double cycle_;
  double red_;
};

/// Earliest green instant at or after `earliest`. A vehicle held by red
/// crosses lead_in after the green starts.
double serve(const SignalClock& clock, double earliest, double lead_in, double limit) {
  double t = earliest;
  for (long m = clock.cycle_of(t);; ++m) {
    const double g = clock.green_start(m);
    if (t < g) t = g + lead_in;
    if (t <= clock.green_end(m)) return t;
    if (t > limit) throw Error("simulation_overflow", "vehicle failed to clear the stopline");
  }
}

struct PhaseRun {
  std::vector<Trajectory> trajectories;
  std::vector<VehicleRecord> vehicles;
};

// Point queue per lane. Crossings are served FIFO at least sat_headway_s
// apart and only in green. A delayed vehicle stands at jam_spacing times its
// rank among lane vehicles still to cross; leftovers move up at red start.
PhaseRun simulate_phase(const ScenarioConfig& scenario, const ScenarioPhase& phase,
                        const std::vector<double>& arrivals) {
  const auto& cfg = phase.config;
  const double dt = scenario.time_step_s;
  const double vf = cfg.free_flow_speed_mps;
  const double l0 = cfg.jam_spacing_m;
  const double hs = scenario.sat_headway_s;
  const double exit_distance = -(vf * scenario.report_interval_s + 1.0);
  const double first_red = scenario.start_time_s + phase.red_offset_s;
  const double limit =
      first_red + (scenario.cycle_count + scenario.max_flush_cycles) * scenario.cycle_length_s;

  const SignalClock clock(first_red, scenario.cycle_length_s, phase.green_s);
  auto rng = phase_rng(scenario.seed, cfg.phase_id, 37);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const auto lanes = static_cast<std::size_t>(cfg.lane_count);
  std::vector<std::vector<double>> lane_crossings(lanes);

  PhaseRun run;
  for (std::size_t v = 0; v < arrivals.size(); ++v) {
    const double a = arrivals[v];

    // Lane with the fewest vehicles still upstream of the stopline at a.
    std::vector<std::size_t> best;
    std::size_t best_count = 0;
    for (std::size_t l = 0; l < lanes; ++l) {
      const auto& c = lane_crossings[l];
      const auto pending = static_cast<std::size_t>(
          c.end() - std::upper_bound(c.begin(), c.end(), a));
      if (best.empty() || pending < best_count) {
        best = {l};
        best_count = pending;
      } else if (pending == best_count) {
        best.push_back(l);
      }
    }
    std::size_t lane = best.front();
    if (best.size() > 1) {
      std::uniform_int_distribution<std::size_t> pick(0, best.size() - 1);
      lane = best[pick(rng)];
    }

    const auto& ahead = lane_crossings[lane];
    const double earliest = ahead.empty() ? a : std::max(a, ahead.back() + hs);
    const double crossing = serve(clock, earliest, l0 / vf, limit);
    // Ranks count from the vehicle's own cycle: nothing served before its
    // free-flow arrival cycle began is ahead of it in the queue.
    const double own_red = clock.red_start(clock.cycle_of(a));

    const long first_step =
        static_cast<long>(std::ceil((a - scenario.detection_range_m / vf) / dt - 1e-9));
    std::vector<double> distance;
    double spot = 0.0;
    int stops = 0;
    bool stopped = false;
    for (long step = first_step;; ++step) {
      const double t = static_cast<double>(step) * dt;
      const double ref = std::max(clock.rank_time(t), own_red);
      const auto waiting = static_cast<double>(
          ahead.end() - std::upper_bound(ahead.begin(), ahead.end(), ref));
      const double target = l0 * (1.0 + waiting);
      spot = distance.empty() ? target : std::min(spot, std::max(target, spot - vf * dt));
      const double d = std::max(vf * (a - t), std::min(spot, vf * (crossing - t)));
      if (!distance.empty()) {
        const bool still = d >= distance.back() - 1e-9;
        if (still && !stopped) ++stops;
        stopped = still;
      }
      distance.push_back(d);
      if (d <= exit_distance) break;
    }

    VehicleRecord rec;
    rec.vehicle_id = "p" + std::to_string(cfg.phase_id) + "-" + std::to_string(v + 1);
    rec.phase_id = cfg.phase_id;
    rec.lane = static_cast<int>(lane) + 1;
    rec.arrival_s = a;
    rec.crossing_s = crossing;
    rec.stops = stops;

    // Reports at a fixed interval with a random per-vehicle phase, until the
    // first report past the stopline.
    Trajectory traj;
    traj.vehicle_id = rec.vehicle_id;
    traj.phase_id = cfg.phase_id;
    const double t0 = static_cast<double>(first_step) * dt;
    const double span = static_cast<double>(distance.size() - 1) * dt;
    for (double offset = unit(rng) * scenario.report_interval_s; offset < span;
         offset += scenario.report_interval_s) {
      const auto j = static_cast<std::size_t>(std::floor(offset / dt));
      const double frac = offset / dt - static_cast<double>(j);
      const double d0 = distance[j];
      const double d1 = distance[j + 1];
      const double pos = d0 + frac * (d1 - d0);
      TrajectoryPoint pt;
      pt.timestamp_s = t0 + offset;
      pt.distance_to_stopline_m = pos;
      pt.speed_mps = std::max(0.0, (d0 - d1) / dt);
      if (scenario.position_noise_std_m > 0.0) {
        pt.distance_to_stopline_m += scenario.position_noise_std_m * noise(rng);
      }
      traj.points.push_back(pt);
      if (pos <= 0.0) break;
    }

    lane_crossings[lane].push_back(crossing);
    if (traj.points.size() >= 2) run.trajectories.push_back(std::move(traj));
    run.vehicles.push_back(std::move(rec));
  }
  return run;
}

}  // namespace

SimulationResult simulate_intersection(const ScenarioConfig& scenario) {
  validate_scenario(scenario);
  const ValidatedPlan plan = build_plan(scenario);
  const auto arrivals = generate_arrivals(scenario, plan);
  return simulate_intersection(scenario, arrivals);
}

SimulationResult simulate_intersection(const ScenarioConfig& scenario,
                                       std::span<const PhaseArrivals> arrivals) {
  validate_scenario(scenario);
  ValidatedPlan plan = build_plan(scenario);
  std::vector<Trajectory> trajectories;
  std::vector<VehicleRecord> vehicles;
  GroundTruth truth;

  for (const auto& phase : scenario.phases) {
    const PhaseId id = phase.config.phase_id;
    const auto it = std::find_if(arrivals.begin(), arrivals.end(),
                                 [id](const PhaseArrivals& a) { return a.phase_id == id; });
    std::vector<double> times;
    if (it != arrivals.end()) times = it->times_s;
    std::sort(times.begin(), times.end());
    const auto& first = plan.phase(id).cycles.front();
    const auto& last = plan.phase(id).cycles.back();
    for (double t : times) {
      if (t < first.red_start_s || t >= last.end_s()) {
        throw Error("invalid_argument", "arrival outside the signal plan horizon");
      }
    }

    PhaseRun run = simulate_phase(scenario, phase, times);

    for (const auto& ct : plan.phase(id).cycles) {
      GroundTruthRow row;
      row.phase_id = id;
      row.cycle_index = ct.k;
      for (const auto& v : run.vehicles) {
        if (v.arrival_s >= ct.red_start_s && v.arrival_s < ct.end_s()) ++row.demand;
        if (v.crossing_s >= ct.red_start_s && v.crossing_s < ct.end_s()) ++row.volume;
        if (v.arrival_s < ct.red_start_s && v.crossing_s >= ct.red_start_s) ++row.initial_queue;
      }
      truth.rows.push_back(row);
    }
    int residual = 0;
    for (const auto& v : run.vehicles) {
      if (v.crossing_s >= last.end_s()) ++residual;
    }
    truth.final_queue.push_back(residual);

    for (auto& t : run.trajectories) trajectories.push_back(std::move(t));
    for (auto& v : run.vehicles) vehicles.push_back(std::move(v));
  }
  return SimulationResult{std::move(plan), std::move(trajectories), std::move(vehicles),
                          std::move(truth)};
}

std::vector<Trajectory> sample_cvs(std::span<const Trajectory> population, double penetration,
                                   std::uint64_t seed) {
  if (!(penetration >= 0.0 && penetration <= 1.0)) {
    throw Error("invalid_argument", "penetration must lie in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Trajectory> out;
  for (const auto& t : population) {
    if (unit(rng) < penetration) out.push_back(t);
  }
  return out;
}

ScenarioConfig reference_scenario() {
  ScenarioConfig s;
  s.name = "reference-8-phase";
  s.cycle_length_s = 150.0;
  s.cycle_count = 80;
  s.start_time_s = 100.0;
  s.sat_headway_s = 1.9;
  s.detection_range_m = 1000.0;
  s.report_interval_s = 3.0;
  s.position_noise_std_m = 0.0;
  s.seed = 20240601;

  struct Row {
    PhaseId id;
    int lanes;
    double green_start;
    double green;
    double demand;
    bool platoon;
  };
  // Ring 1: 1-2-3-4, ring 2: 5-6-7-8, greens back to back within 150 s.
  const Row rows[] = {
      {1, 2, 0.0, 30.0, 28.0, true},    {2, 2, 30.0, 50.0, 46.0, true},
      {3, 2, 80.0, 28.0, 22.0, false},  {4, 2, 108.0, 42.0, 36.0, false},
      {5, 2, 0.0, 32.0, 30.0, true},    {6, 2, 32.0, 48.0, 44.0, true},
      {7, 2, 80.0, 26.0, 20.0, false},  {8, 3, 106.0, 44.0, 50.0, false},
  };
  for (const auto& r : rows) {
    ScenarioPhase p;
    p.config.phase_id = r.id;
    p.config.lane_count = r.lanes;
    p.config.jam_spacing_m = 7.0;
    p.config.free_flow_speed_mps = 14.0;
    p.green_s = r.green;
    p.red_offset_s = std::fmod(r.green_start + r.green, s.cycle_length_s);
    // Fixed mean inputs; cycle-to-cycle variation comes from the arrivals.
    p.demand.mean_veh = r.demand;
    if (r.platoon) {
      p.pattern = ArrivalPattern::Platoon;
      p.platoon = {0.15, 0.35, 0.7};
    }
    s.phases.push_back(p);
  }
  return s;
}

}  // namespace sigdemand
