// End-to-end estimation: CV preparation, calibration of profiles / prior /
// saturation pools from historical CVs, and the causal cycle-by-cycle run of
// each estimator with its own initial-queue recursion.
#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sigdemand/arrival_profile.hpp"
#include "sigdemand/domain.hpp"
#include "sigdemand/estimators.hpp"
#include "sigdemand/initial_queue.hpp"
#include "sigdemand/prior.hpp"
#include "sigdemand/simulator.hpp"
#include "sigdemand/trajectory_prep.hpp"

namespace sigdemand {

/// Everything extracted from one CV trajectory.
struct PreparedCv {
  PhaseId phase_id = 0;
  std::vector<QueueEvent> events;
  std::optional<double> expected_arrival_s;
  /// Cycle containing the expected arrival.
  std::optional<int> cycle_index;
  std::optional<CvType> type;
  /// Type 2 only: the cycle whose green released the second stop, and the
  /// lower bound that stop puts on that cycle's per-lane initial queue.
  std::optional<int> queue_floor_cycle;
  std::optional<int> queue_floor;
  /// Present for queued CVs whose expected arrival is inside the plan.
  std::optional<ArrivalObservation> observation;
  /// Cycle whose green released the final stop, with the departure point.
  std::optional<int> departure_cycle;
  std::optional<Departure> departure;
};

PreparedCv prepare_cv(const Trajectory& traj, const ValidatedPlan& plan,
                      double speed_threshold_mps = kQueueSpeedThresholdMps);

struct CalibrationOptions {
  int profile_bins = kDefaultProfileBins;
  double profile_floor = kDefaultProfileFloor;
  double min_share_stddev = kMinShareStddev;
  int min_usable_bins = kMinUsableBins;
  double count_bin_s = kCountBinSeconds;
  /// Skips the departure-wave fit for the lambda0 support when set.
  std::optional<double> sat_headway_s;
};

/// Time-of-day inputs shared by every cycle of a run.
struct Calibration {
  /// Plan order.
  std::vector<ArrivalProfile> profiles;
  PriorSpec prior;
  /// Pooled departures per phase (leave time relative to green start).
  std::map<PhaseId, std::vector<Departure>> departure_pools;
  double sat_headway_s = 0.0;
};

/// Builds profiles, the share prior from 5-minute CV counts, per-phase
/// departure pools and the lambda0 support from historical CVs.
Calibration calibrate(const ValidatedPlan& plan, std::span<const Trajectory> historical,
                      const CalibrationOptions& options = {});

/// Calibration from cached profile / prior files: no departure pools, the
/// saturation headway implied by the support.
Calibration calibration_from_cache(const ValidatedPlan& plan, std::vector<ArrivalProfile> profiles,
                                   PriorSpec prior);

struct EstimateOptions {
  std::vector<Method> methods{Method::Wmle, Method::JoMle, Method::JoMap};
  SolverConfig solver;
  double speed_threshold_mps = kQueueSpeedThresholdMps;
};

struct QueueDiagnostic {
  Method method = Method::JoMap;
  InitialQueueState state;
};

struct EstimationResult {
  /// Ordered by cycle, then method, then plan phase order.
  std::vector<DemandEstimate> estimates;
  std::vector<QueueDiagnostic> queue_states;
  /// Raw (unadjusted) queued observations per phase and cycle.
  std::size_t observation_count = 0;
};

/// Runs the requested methods over cycles 1..K (K = shortest phase) in
/// real-time order. Each method feeds its own previous-cycle lane rate into
/// the initial-queue recursion; after a failed cycle the last successful
/// rate is carried forward.
EstimationResult estimate_demands(const ValidatedPlan& plan, std::span<const Trajectory> cvs,
                                  const Calibration& calibration,
                                  const EstimateOptions& options = {});

struct RegroupedInput {
  ValidatedPlan plan;
  std::vector<Trajectory> trajectories;
};

/// Splits a single-phase record into `groups` pseudo-phases by interleaving
/// cycles round-robin (cycle k goes to group (k - 1) % groups + 1 as cycle
/// (k - 1) / groups + 1). Trajectories are shifted in time so each pseudo
/// cycle starts where the group's timeline expects it.
RegroupedInput regroup_round_robin(const ValidatedPlan& plan, std::span<const Trajectory> cvs,
                                   int groups);
GroundTruth regroup_truth(const GroundTruth& truth, int groups);

}  // namespace sigdemand
