// Shared vocabulary: trajectories, phases, signal plans and cycle lookup.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigdemand {

using PhaseId = int;

/// Error carrying a short machine-readable kind ("gap", "overlap",
/// "insufficient_departures", ...) next to the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct TrajectoryPoint {
  double timestamp_s = 0.0;
  /// Signed: positive upstream of the stopline, <= 0 once crossed.
  double distance_to_stopline_m = 0.0;
  double speed_mps = 0.0;
};

struct Trajectory {
  std::string vehicle_id;
  PhaseId phase_id = 0;
  std::vector<TrajectoryPoint> points;
};

/// Throws Error("invalid_trajectory") unless timestamps are finite and
/// strictly increasing, speeds are non-negative and there are >= 2 points.
void validate_trajectory(const Trajectory& traj);

struct PhaseConfig {
  PhaseId phase_id = 0;
  int lane_count = 1;
  double jam_spacing_m = 7.0;
  double free_flow_speed_mps = 14.0;
};

struct CycleTiming {
  int k = 1;
  double red_start_s = 0.0;
  double green_start_s = 0.0;
  double green_duration_s = 0.0;
  double cycle_length_s = 0.0;

  double end_s() const { return red_start_s + cycle_length_s; }
  double green_end_s() const { return green_start_s + green_duration_s; }
};

struct PhaseSchedule {
  PhaseConfig config;
  std::vector<CycleTiming> cycles;
};

struct SignalPlan {
  std::vector<PhaseSchedule> phases;
};

class ValidatedPlan;
ValidatedPlan validate_signal_plan(SignalPlan plan);

/// A signal plan whose per-phase cycles are known to be contiguous and
/// well formed. Only obtainable through validate_signal_plan.
class ValidatedPlan {
 public:
  const std::vector<PhaseSchedule>& phases() const { return plan_.phases; }
  const SignalPlan& plan() const { return plan_; }
  bool has_phase(PhaseId id) const;
  const PhaseSchedule& phase(PhaseId id) const;
  std::vector<PhaseConfig> phase_configs() const;

  /// Cycle containing `time_s` (half-open [red_start, next red_start)),
  /// or nullptr outside the horizon.
  const CycleTiming* find_cycle(PhaseId id, double time_s) const;
  /// Cycle with index k, or nullptr.
  const CycleTiming* cycle(PhaseId id, int k) const;

 private:
  friend ValidatedPlan validate_signal_plan(SignalPlan plan);
  explicit ValidatedPlan(SignalPlan plan) : plan_(std::move(plan)) {}

  SignalPlan plan_;
};

/// Index k of the cycle containing time_s. Throws Error("out_of_horizon").
int locate_cycle(const ValidatedPlan& plan, PhaseId phase_id, double time_s);

inline constexpr double kContiguityTolerance = 1e-9;

}  // namespace sigdemand
