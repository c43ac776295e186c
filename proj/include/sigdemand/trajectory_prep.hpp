// Turning raw CV trajectories into queue events, arrival observations,
// CV type labels and departure-wave saturation estimates.
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sigdemand/domain.hpp"

namespace sigdemand {

/// 5 km/h.
inline constexpr double kQueueSpeedThresholdMps = 5.0 / 3.6;

struct QueueEvent {
  double join_time_s = 0.0;
  double join_distance_m = 0.0;
  double leave_time_s = 0.0;
  double leave_distance_m = 0.0;
  int episode_index = 1;
  /// False when the trajectory ends while still queued; leave_* then hold
  /// the last sample.
  bool departed = true;
};

/// One event per stop episode. An episode opens at the first sample below
/// the threshold and closes once speed recovers and the vehicle has advanced
/// more than half a jam spacing past its stop position.
std::vector<QueueEvent> detect_queue_events(const Trajectory& traj, double jam_spacing_m,
                                            double speed_threshold_mps = kQueueSpeedThresholdMps);

struct ArrivalObservation {
  PhaseId phase_id = 0;
  int cycle_index = 0;
  int vehicles_ahead = 0;
  /// Expected arrival measured from the red start of the cycle.
  double arrival_offset_s = 0.0;
  double raw_weight = 0.0;
  double norm_weight = 0.0;
  /// Set when initial-queue adjustment drove the position below zero.
  bool clamped = false;
};

/// max(1, round(distance / jam_spacing)).
int queuing_position(double distance_m, double jam_spacing_m);

/// Mean speed of above-threshold samples before `before_time_s`, falling
/// back to the configured free-flow speed.
double approach_speed(const Trajectory& traj, double before_time_s, const PhaseConfig& cfg,
                      double speed_threshold_mps = kQueueSpeedThresholdMps);

/// Observation from the vehicle's first stop: position from the join
/// distance, expected arrival T + L / V mapped into its cycle. Weights are
/// left at zero. Throws Error("out_of_horizon").
ArrivalObservation derive_observation(const QueueEvent& event, const Trajectory& traj,
                                      const ValidatedPlan& plan, const PhaseConfig& cfg,
                                      double speed_threshold_mps = kQueueSpeedThresholdMps);

enum class CvKind { Type1, Type2, Type3 };

struct CvType {
  CvKind kind = CvKind::Type3;
  /// Queuing position of the second stop; present iff kind == Type2.
  std::optional<int> secondary_position;
};

struct StoplineCrossing {
  double time_s = 0.0;
  double speed_mps = 0.0;
};

/// First moving sample at or past the stopline; the crossing time is
/// interpolated against the preceding sample.
std::optional<StoplineCrossing> stopline_crossing(
    const Trajectory& traj, double speed_threshold_mps = kQueueSpeedThresholdMps);

/// Type1: one stop before crossing; Type2: two or more; Type3: none.
/// nullopt when the trajectory never crosses the stopline.
std::optional<CvType> classify_cv(const Trajectory& traj, std::span<const QueueEvent> events,
                                  const PhaseConfig& cfg,
                                  double speed_threshold_mps = kQueueSpeedThresholdMps);

/// Expected stopline arrival: T + L / V for queued vehicles, the stopline
/// crossing time otherwise.
std::optional<double> expected_arrival_time(const Trajectory& traj,
                                            std::span<const QueueEvent> events,
                                            const PhaseConfig& cfg,
                                            double speed_threshold_mps = kQueueSpeedThresholdMps);

struct Departure {
  /// Seconds since the green start that released the queue.
  double leave_time_s = 0.0;
  double leave_distance_m = 0.0;
  double stopline_speed_mps = 0.0;
};

enum class SaturationSource { PerCycle, TodAggregate };

struct SaturationEstimate {
  double sat_rate_vps = 0.0;
  double sat_headway_s = 0.0;
  double departure_wave_mps = 0.0;
  double stopline_speed_mps = 0.0;
  SaturationSource source = SaturationSource::PerCycle;
};

/// s = w v / ((w + v) d0) from the least-squares departure wave through the
/// queue-leaving points. Falls back to `tod_pool` when the cycle has fewer
/// than two departures. Throws Error("insufficient_departures") or
/// Error("degenerate_wave").
SaturationEstimate fit_saturation_rate(std::span<const Departure> cycle_departures, double d0_m,
                                       std::span<const Departure> tod_pool = {});

}  // namespace sigdemand
