#include "sigdemand/trajectory_prep.hpp"

#include <algorithm>
#include <cmath>

namespace sigdemand {

std::vector<QueueEvent> detect_queue_events(const Trajectory& traj, double jam_spacing_m,
                                            double speed_threshold_mps) {
  std::vector<QueueEvent> events;
  const auto& pts = traj.points;
  const double min_advance = 0.5 * jam_spacing_m;

  bool queued = false;
  std::size_t last_slow = 0;
  QueueEvent current;

  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const bool slow = p.speed_mps < speed_threshold_mps;
    if (!queued) {
      if (slow) {
        queued = true;
        last_slow = i;
        current = QueueEvent{};
        current.join_time_s = p.timestamp_s;
        current.join_distance_m = p.distance_to_stopline_m;
        current.episode_index = static_cast<int>(events.size()) + 1;
      }
      continue;
    }
    if (slow) {
      last_slow = i;
      continue;
    }
    const auto& stop = pts[last_slow];
    if (stop.distance_to_stopline_m - p.distance_to_stopline_m <= min_advance) continue;

    // Start of motion, back-projected from the first moving sample.
    const auto& moving = pts[last_slow + 1];
    double leave = moving.timestamp_s;
    if (moving.speed_mps > 0.0) {
      leave -= (stop.distance_to_stopline_m - moving.distance_to_stopline_m) / moving.speed_mps;
    }
    current.leave_time_s = std::clamp(leave, stop.timestamp_s, moving.timestamp_s);
    current.leave_distance_m = stop.distance_to_stopline_m;
    current.departed = true;
    events.push_back(current);
    queued = false;
  }

  if (queued) {
    current.leave_time_s = pts.back().timestamp_s;
    current.leave_distance_m = pts.back().distance_to_stopline_m;
    current.departed = false;
    events.push_back(current);
  }
  return events;
}

int queuing_position(double distance_m, double jam_spacing_m) {
  const double ratio = distance_m / jam_spacing_m;
  return std::max(1, static_cast<int>(std::lround(ratio)));
}

double approach_speed(const Trajectory& traj, double before_time_s, const PhaseConfig& cfg,
                      double speed_threshold_mps) {
  double sum = 0.0;
  int count = 0;
  for (const auto& p : traj.points) {
    if (p.timestamp_s >= before_time_s) break;
    if (p.speed_mps >= speed_threshold_mps) {
      sum += p.speed_mps;
      ++count;
    }
  }
  return count > 0 ? sum / count : cfg.free_flow_speed_mps;
}

ArrivalObservation derive_observation(const QueueEvent& event, const Trajectory& traj,
                                      const ValidatedPlan& plan, const PhaseConfig& cfg,
                                      double speed_threshold_mps) {
  const double distance = std::max(0.0, event.join_distance_m);
  const double speed = approach_speed(traj, event.join_time_s, cfg, speed_threshold_mps);
  const double expected = event.join_time_s + distance / speed;

  const CycleTiming* cycle = plan.find_cycle(traj.phase_id, expected);
  if (cycle == nullptr) {
    throw Error("out_of_horizon", "expected arrival of vehicle " + traj.vehicle_id +
                                      " outside signal plan horizon");
  }
  ArrivalObservation obs;
  obs.phase_id = traj.phase_id;
  obs.cycle_index = cycle->k;
  obs.vehicles_ahead = queuing_position(event.join_distance_m, cfg.jam_spacing_m);
  obs.arrival_offset_s = expected - cycle->red_start_s;
  return obs;
}

std::optional<StoplineCrossing> stopline_crossing(const Trajectory& traj,
                                                  double speed_threshold_mps) {
  const auto& pts = traj.points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    if (p.distance_to_stopline_m > 0.0 || p.speed_mps < speed_threshold_mps) continue;
    double t = p.timestamp_s + p.distance_to_stopline_m / p.speed_mps;
    if (i > 0) t = std::max(t, pts[i - 1].timestamp_s);
    return StoplineCrossing{t, p.speed_mps};
  }
  return std::nullopt;
}

std::optional<CvType> classify_cv(const Trajectory& traj, std::span<const QueueEvent> events,
                                  const PhaseConfig& cfg, double speed_threshold_mps) {
  const auto crossing = stopline_crossing(traj, speed_threshold_mps);
  if (!crossing) return std::nullopt;

  std::vector<const QueueEvent*> before;
  for (const auto& e : events) {
    if (e.join_time_s < crossing->time_s) before.push_back(&e);
  }
  CvType type;
  if (before.empty()) {
    type.kind = CvKind::Type3;
  } else if (before.size() == 1) {
    type.kind = CvKind::Type1;
  } else {
    type.kind = CvKind::Type2;
    type.secondary_position = queuing_position(before[1]->join_distance_m, cfg.jam_spacing_m);
  }
  return type;
}

std::optional<double> expected_arrival_time(const Trajectory& traj,
                                            std::span<const QueueEvent> events,
                                            const PhaseConfig& cfg, double speed_threshold_mps) {
  if (!events.empty()) {
    const auto& first = events.front();
    const double speed = approach_speed(traj, first.join_time_s, cfg, speed_threshold_mps);
    return first.join_time_s + std::max(0.0, first.join_distance_m) / speed;
  }
  if (auto crossing = stopline_crossing(traj, speed_threshold_mps)) return crossing->time_s;
  return std::nullopt;
}

namespace {

SaturationEstimate fit_points(std::span<const Departure> deps, double d0_m,
                              SaturationSource source) {
  const double n = static_cast<double>(deps.size());
  double mean_t = 0.0;
  double mean_d = 0.0;
  double mean_v = 0.0;
  for (const auto& d : deps) {
    mean_t += d.leave_time_s;
    mean_d += d.leave_distance_m;
    mean_v += d.stopline_speed_mps;
  }
  mean_t /= n;
  mean_d /= n;
  mean_v /= n;

  double stt = 0.0;
  double std_ = 0.0;
  for (const auto& d : deps) {
    stt += (d.leave_time_s - mean_t) * (d.leave_time_s - mean_t);
    std_ += (d.leave_time_s - mean_t) * (d.leave_distance_m - mean_d);
  }
  if (!(stt > 0.0)) throw Error("degenerate_wave", "departure times have no spread");
  // The departure wave travels upstream, so leave distance grows with time.
  const double wave = std_ / stt;
  if (!(wave > 0.0) || !std::isfinite(wave)) {
    throw Error("degenerate_wave", "non-positive fitted departure wave speed");
  }
  if (!(mean_v > 0.0)) throw Error("degenerate_wave", "non-positive stopline speed");

  SaturationEstimate est;
  est.departure_wave_mps = wave;
  est.stopline_speed_mps = mean_v;
  est.sat_rate_vps = wave * mean_v / ((wave + mean_v) * d0_m);
  est.sat_headway_s = 1.0 / est.sat_rate_vps;
  est.source = source;
  return est;
}

}  // namespace

SaturationEstimate fit_saturation_rate(std::span<const Departure> cycle_departures, double d0_m,
                                       std::span<const Departure> tod_pool) {
  if (!(d0_m > 0.0)) throw Error("invalid_argument", "jam spacing must be positive");
  if (cycle_departures.size() >= 2) {
    return fit_points(cycle_departures, d0_m, SaturationSource::PerCycle);
  }
  if (tod_pool.size() >= 2) return fit_points(tod_pool, d0_m, SaturationSource::TodAggregate);
  throw Error("insufficient_departures", "fewer than two queue departures, even after pooling");
}

}  // namespace sigdemand
