#include "sigdemand/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace sigdemand {

namespace {

// Cycle whose green released a stop that ended at leave_s. Queues keep
// discharging for a moment after the green ends, so a leave time early in a
// red belongs to the previous green.
const CycleTiming* service_cycle(const ValidatedPlan& plan, PhaseId phase_id, double leave_s) {
  const CycleTiming* ct = plan.find_cycle(phase_id, leave_s);
  if (ct == nullptr) return nullptr;
  if (leave_s < ct->green_start_s - 1.0) return plan.cycle(phase_id, ct->k - 1);
  return ct;
}

}  // namespace

PreparedCv prepare_cv(const Trajectory& traj, const ValidatedPlan& plan,
                      double speed_threshold_mps) {
  const PhaseConfig& cfg = plan.phase(traj.phase_id).config;
  PreparedCv cv;
  cv.phase_id = traj.phase_id;
  cv.events = detect_queue_events(traj, cfg.jam_spacing_m, speed_threshold_mps);
  cv.expected_arrival_s = expected_arrival_time(traj, cv.events, cfg, speed_threshold_mps);
  cv.type = classify_cv(traj, cv.events, cfg, speed_threshold_mps);
  if (cv.expected_arrival_s) {
    if (const CycleTiming* ct = plan.find_cycle(traj.phase_id, *cv.expected_arrival_s)) {
      cv.cycle_index = ct->k;
      if (!cv.events.empty()) {
        cv.observation = derive_observation(cv.events.front(), traj, plan, cfg, speed_threshold_mps);
        // A stop that ended before this cycle began belongs to the previous
        // cycle's queue; the position counts from the first stop still held
        // (or taken) once the cycle has started.
        for (const auto& e : cv.events) {
          if (e.leave_time_s >= ct->red_start_s) {
            cv.observation->vehicles_ahead = queuing_position(e.join_distance_m, cfg.jam_spacing_m);
            break;
          }
        }
      }
    }
  }

  const auto crossing = stopline_crossing(traj, speed_threshold_mps);
  if (!crossing) return cv;
  // The second stop was held when the releasing cycle began, so its
  // position bounds that cycle's initial queue.
  if (cv.type && cv.type->kind == CvKind::Type2 && cv.events.size() > 1 && cv.expected_arrival_s) {
    const QueueEvent& second = cv.events[1];
    // Only an arrival from before that cycle is part of its initial queue;
    // later arrivals ahead of the CV would inflate the count.
    const CycleTiming* sc = service_cycle(plan, traj.phase_id, second.leave_time_s);
    if (sc != nullptr && *cv.expected_arrival_s < sc->red_start_s) {
      cv.queue_floor_cycle = sc->k;
      cv.queue_floor = *cv.type->secondary_position;
    }
  }

  const QueueEvent* last = nullptr;
  for (const auto& e : cv.events) {
    if (e.departed && e.join_time_s < crossing->time_s) last = &e;
  }
  if (last == nullptr) return cv;
  const CycleTiming* ct = service_cycle(plan, traj.phase_id, last->leave_time_s);
  if (ct == nullptr) return cv;
  cv.departure_cycle = ct->k;
  cv.departure = Departure{std::max(0.0, last->leave_time_s - ct->green_start_s),
                           last->leave_distance_m, crossing->speed_mps};
  return cv;
}

Calibration calibrate(const ValidatedPlan& plan, std::span<const Trajectory> historical,
                      const CalibrationOptions& options) {
  const auto& phases = plan.phases();
  // Share bins cover only the span where every phase has cycles, and only
  // whole bins; a partial bin skews the shares of the phases it clips.
  double start = phases.front().cycles.front().red_start_s;
  double end = phases.front().cycles.back().end_s();
  for (const auto& s : phases) {
    start = std::max(start, s.cycles.front().red_start_s);
    end = std::min(end, s.cycles.back().end_s());
  }
  if (!(options.count_bin_s > 0.0)) throw Error("invalid_argument", "count bin must be > 0");
  const auto bin_count = static_cast<std::size_t>(
      std::max(0.0, std::floor((end - start) / options.count_bin_s + 1e-9)));

  std::map<PhaseId, std::vector<HistoricalArrival>> offsets;
  std::map<PhaseId, std::vector<int>> counts;
  for (const auto& s : phases) counts[s.config.phase_id].assign(bin_count, 0);

  Calibration cal;
  std::vector<Departure> all_departures;
  for (const auto& traj : historical) {
    if (!plan.has_phase(traj.phase_id)) continue;
    const PreparedCv cv = prepare_cv(traj, plan);
    if (cv.cycle_index) {
      const CycleTiming* ct = plan.cycle(cv.phase_id, *cv.cycle_index);
      offsets[cv.phase_id].push_back({*cv.expected_arrival_s - ct->red_start_s, ct->cycle_length_s});
      const double pos = (*cv.expected_arrival_s - start) / options.count_bin_s;
      if (pos >= 0.0 && pos < static_cast<double>(bin_count)) {
        ++counts[cv.phase_id][static_cast<std::size_t>(pos)];
      }
    }
    if (cv.departure) {
      cal.departure_pools[cv.phase_id].push_back(*cv.departure);
      all_departures.push_back(*cv.departure);
    }
  }

  std::vector<PhaseCountSeries> series;
  double jam_sum = 0.0;
  for (const auto& s : phases) {
    const PhaseId id = s.config.phase_id;
    cal.profiles.push_back(
        build_profile(id, offsets[id], options.profile_bins, options.profile_floor));
    series.push_back({id, counts[id]});
    jam_sum += s.config.jam_spacing_m;
  }

  if (options.sat_headway_s) {
    cal.sat_headway_s = *options.sat_headway_s;
  } else {
    const double d0 = jam_sum / static_cast<double>(phases.size());
    cal.sat_headway_s = fit_saturation_rate({}, d0, all_departures).sat_headway_s;
  }
  const auto configs = plan.phase_configs();
  cal.prior = make_prior(
      build_alpha_prior(series, options.min_share_stddev, options.min_usable_bins),
      lambda0_support(configs, cal.sat_headway_s));
  return cal;
}

Calibration calibration_from_cache(const ValidatedPlan& plan, std::vector<ArrivalProfile> profiles,
                                   PriorSpec prior) {
  Calibration cal;
  int lanes = 0;
  for (const auto& s : plan.phases()) {
    const PhaseId id = s.config.phase_id;
    lanes += s.config.lane_count;
    auto it = std::find_if(profiles.begin(), profiles.end(),
                           [id](const ArrivalProfile& p) { return p.phase_id == id; });
    cal.profiles.push_back(it != profiles.end() ? *it : ArrivalProfile::uniform(id));
  }
  cal.prior = std::move(prior);
  if (!(cal.prior.lambda0_upper > 0.0)) throw Error("invalid_argument", "lambda0_upper must be > 0");
  cal.sat_headway_s = lanes / cal.prior.lambda0_upper;
  return cal;
}

namespace {

struct CycleBucket {
  std::vector<ArrivalObservation> observations;
  std::vector<int> type1_positions;
  /// Type 2 second-stop bounds on this cycle's initial queue.
  std::vector<int> queue_floors;
  bool type3 = false;
  std::vector<Departure> departures;
};

struct MethodState {
  double queue = 0.0;
  std::optional<double> lane_rate;
};

PriorSpec align_prior(const PriorSpec& prior, const ValidatedPlan& plan) {
  PriorSpec out = prior;
  out.phases.clear();
  for (const auto& s : plan.phases()) out.phases.push_back(prior.phase(s.config.phase_id));
  return out;
}

const ArrivalProfile& profile_for(const Calibration& cal, PhaseId id) {
  for (const auto& p : cal.profiles) {
    if (p.phase_id == id) return p;
  }
  throw Error("unknown_phase", "no arrival profile for phase " + std::to_string(id));
}

double saturation_rate(const CycleBucket& bucket, const PhaseConfig& cfg,
                       std::span<const Departure> pool, double default_headway_s) {
  try {
    return fit_saturation_rate(bucket.departures, cfg.jam_spacing_m, pool).sat_rate_vps;
  } catch (const Error&) {
  }
  try {
    return fit_saturation_rate({}, cfg.jam_spacing_m, pool).sat_rate_vps;
  } catch (const Error&) {
  }
  return 1.0 / default_headway_s;
}

}  // namespace

EstimationResult estimate_demands(const ValidatedPlan& plan, std::span<const Trajectory> cvs,
                                  const Calibration& calibration, const EstimateOptions& options) {
  const auto& phases = plan.phases();
  const std::size_t z_count = phases.size();
  int cycle_count = static_cast<int>(phases.front().cycles.size());
  for (const auto& s : phases) cycle_count = std::min(cycle_count, static_cast<int>(s.cycles.size()));
  const PriorSpec prior = align_prior(calibration.prior, plan);

  // buckets[z][k], k = 1..K (index 0 unused).
  std::vector<std::vector<CycleBucket>> buckets(
      z_count, std::vector<CycleBucket>(static_cast<std::size_t>(cycle_count) + 1));
  std::map<PhaseId, std::size_t> index;
  for (std::size_t z = 0; z < z_count; ++z) index[phases[z].config.phase_id] = z;

  EstimationResult result;
  for (const auto& traj : cvs) {
    const auto it = index.find(traj.phase_id);
    if (it == index.end()) throw Error("unknown_phase", "CV on phase " + std::to_string(traj.phase_id));
    const std::size_t z = it->second;
    const PreparedCv cv = prepare_cv(traj, plan, options.speed_threshold_mps);
    if (cv.cycle_index && *cv.cycle_index <= cycle_count) {
      auto& b = buckets[z][static_cast<std::size_t>(*cv.cycle_index)];
      if (cv.observation) {
        b.observations.push_back(*cv.observation);
        ++result.observation_count;
      }
      if (cv.type) {
        switch (cv.type->kind) {
          case CvKind::Type1:
            if (cv.observation) b.type1_positions.push_back(cv.observation->vehicles_ahead);
            break;
          case CvKind::Type2:
            break;
          case CvKind::Type3:
            b.type3 = true;
            break;
        }
      }
    }
    if (cv.queue_floor_cycle && *cv.queue_floor_cycle <= cycle_count) {
      buckets[z][static_cast<std::size_t>(*cv.queue_floor_cycle)].queue_floors.push_back(
          *cv.queue_floor);
    }
    if (cv.departure && *cv.departure_cycle <= cycle_count) {
      buckets[z][static_cast<std::size_t>(*cv.departure_cycle)].departures.push_back(*cv.departure);
    }
  }

  // Saturation rate of each completed cycle, shared by all methods.
  std::vector<std::vector<double>> sat(z_count,
                                       std::vector<double>(static_cast<std::size_t>(cycle_count) + 1));
  for (std::size_t z = 0; z < z_count; ++z) {
    const auto pool_it = calibration.departure_pools.find(phases[z].config.phase_id);
    const std::span<const Departure> pool =
        pool_it != calibration.departure_pools.end() ? std::span<const Departure>(pool_it->second)
                                                     : std::span<const Departure>();
    for (int k = 1; k <= cycle_count; ++k) {
      sat[z][static_cast<std::size_t>(k)] = saturation_rate(
          buckets[z][static_cast<std::size_t>(k)], phases[z].config, pool, calibration.sat_headway_s);
    }
  }

  std::vector<std::vector<MethodState>> state(options.methods.size(),
                                              std::vector<MethodState>(z_count));
  for (int k = 1; k <= cycle_count; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    std::vector<double> cycle_lengths(z_count);
    for (std::size_t z = 0; z < z_count; ++z) {
      cycle_lengths[z] = plan.cycle(phases[z].config.phase_id, k)->cycle_length_s;
    }

    for (std::size_t m = 0; m < options.methods.size(); ++m) {
      const Method method = options.methods[m];
      std::vector<std::vector<ArrivalObservation>> adjusted(z_count);
      for (std::size_t z = 0; z < z_count; ++z) {
        const auto& cfg = phases[z].config;
        const auto& bucket = buckets[z][kk];
        QueueEvidence evidence;
        evidence.type1_positions_current = bucket.type1_positions;
        evidence.type2_secondary_prev = bucket.queue_floors;
        InitialQueueState qs;
        qs.phase_id = cfg.phase_id;
        qs.cycle_index = k;
        auto& st = state[m][z];
        if (k > 1) {
          const auto& prev_bucket = buckets[z][kk - 1];
          evidence.type3_prev = prev_bucket.type3;
          const CycleTiming* prev = plan.cycle(cfg.phase_id, k - 1);
          qs.conservation_estimate =
              conservation_estimate(st.queue, st.lane_rate.value_or(0.0), prev->cycle_length_s,
                                    sat[z][kk - 1], prev->green_duration_s);
        }
        const QueueBounds bounds = cv_bounds(evidence);
        qs.lower_bound = bounds.lower;
        qs.upper_bound = bounds.upper;
        qs.inconsistent_bounds = bounds.inconsistent;
        qs.final_estimate = finalize_initial_queue(qs.conservation_estimate, bounds);
        st.queue = qs.final_estimate;
        result.queue_states.push_back({method, qs});

        adjusted[z] = adjust_observations(bucket.observations, qs.final_estimate);
        if (!adjusted[z].empty()) {
          observation_weights(adjusted[z], profile_for(calibration, cfg.phase_id), cycle_lengths[z]);
        }
      }

      std::vector<DemandEstimate> produced;
      if (method == Method::Wmle) {
        for (std::size_t z = 0; z < z_count; ++z) {
          produced.push_back(wmle(phases[z].config.phase_id, k, adjusted[z],
                                  phases[z].config.lane_count, cycle_lengths[z]));
        }
      } else {
        std::vector<PhaseStats> stats;
        for (std::size_t z = 0; z < z_count; ++z) {
          stats.push_back(sufficient_stats(phases[z].config.phase_id, adjusted[z],
                                           phases[z].config.lane_count));
        }
        const JointEstimate joint = method == Method::JoMle
                                        ? jomle(stats, prior, cycle_lengths, k)
                                        : jomap(stats, prior, cycle_lengths, k, options.solver);
        produced = joint.demands;
      }
      for (std::size_t z = 0; z < z_count; ++z) {
        if (produced[z].ok()) state[m][z].lane_rate = produced[z].lane_rate_vps;
        result.estimates.push_back(produced[z]);
      }
    }
  }
  return result;
}

RegroupedInput regroup_round_robin(const ValidatedPlan& plan, std::span<const Trajectory> cvs,
                                   int groups) {
  if (groups < 1) throw Error("invalid_argument", "group count must be >= 1");
  if (plan.phases().size() != 1) {
    throw Error("invalid_argument", "round-robin regrouping needs a single-phase plan");
  }
  const PhaseSchedule& source = plan.phases().front();
  const auto& cycles = source.cycles;

  SignalPlan out;
  // shift[i]: time offset applied to content of source cycle i.
  std::vector<double> shift(cycles.size(), 0.0);
  for (int g = 1; g <= groups; ++g) {
    PhaseSchedule sched;
    sched.config = source.config;
    sched.config.phase_id = g;
    double red = cycles.front().red_start_s;
    int j = 0;
    for (std::size_t i = static_cast<std::size_t>(g - 1); i < cycles.size();
         i += static_cast<std::size_t>(groups)) {
      const auto& src = cycles[i];
      CycleTiming ct = src;
      ct.k = ++j;
      ct.red_start_s = red;
      ct.green_start_s = red + (src.green_start_s - src.red_start_s);
      shift[i] = red - src.red_start_s;
      red += src.cycle_length_s;
      sched.cycles.push_back(ct);
    }
    if (!sched.cycles.empty()) out.phases.push_back(std::move(sched));
  }

  std::vector<Trajectory> moved;
  for (const auto& traj : cvs) {
    if (traj.phase_id != source.config.phase_id) continue;
    const PreparedCv cv = prepare_cv(traj, plan);
    if (!cv.cycle_index) continue;
    const auto i = static_cast<std::size_t>(*cv.cycle_index - cycles.front().k);
    Trajectory t = traj;
    t.phase_id = static_cast<PhaseId>(i % static_cast<std::size_t>(groups)) + 1;
    for (auto& p : t.points) p.timestamp_s += shift[i];
    moved.push_back(std::move(t));
  }
  return RegroupedInput{validate_signal_plan(std::move(out)), std::move(moved)};
}

GroundTruth regroup_truth(const GroundTruth& truth, int groups) {
  if (groups < 1) throw Error("invalid_argument", "group count must be >= 1");
  GroundTruth out;
  for (const auto& r : truth.rows) {
    GroundTruthRow row = r;
    row.phase_id = (r.cycle_index - 1) % groups + 1;
    row.cycle_index = (r.cycle_index - 1) / groups + 1;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace sigdemand
