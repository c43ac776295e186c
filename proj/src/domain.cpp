#include "sigdemand/domain.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace sigdemand {

void validate_trajectory(const Trajectory& traj) {
  if (traj.points.size() < 2) {
    throw Error("invalid_trajectory",
                "trajectory " + traj.vehicle_id + " has fewer than 2 points");
  }
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const auto& p = traj.points[i];
    if (!std::isfinite(p.timestamp_s) || !std::isfinite(p.distance_to_stopline_m) ||
        !std::isfinite(p.speed_mps)) {
      throw Error("invalid_trajectory", "trajectory " + traj.vehicle_id + " has non-finite values");
    }
    if (p.speed_mps < 0.0) {
      throw Error("invalid_trajectory", "trajectory " + traj.vehicle_id + " has negative speed");
    }
    if (i > 0 && !(p.timestamp_s > traj.points[i - 1].timestamp_s)) {
      throw Error("invalid_trajectory",
                  "trajectory " + traj.vehicle_id + " timestamps not strictly increasing");
    }
  }
}

namespace {

std::string phase_label(PhaseId id) { return "phase " + std::to_string(id); }

void validate_phase(const PhaseSchedule& schedule) {
  const auto& cfg = schedule.config;
  const std::string label = phase_label(cfg.phase_id);
  if (cfg.lane_count < 1) throw Error("invalid_phase", label + ": lane_count must be >= 1");
  if (!(cfg.jam_spacing_m > 0.0)) throw Error("invalid_phase", label + ": jam_spacing_m must be > 0");
  if (!(cfg.free_flow_speed_mps > 0.0)) {
    throw Error("invalid_phase", label + ": free_flow_speed_mps must be > 0");
  }
  if (schedule.cycles.empty()) throw Error("empty_phase", label + ": no cycles");

  for (std::size_t i = 0; i < schedule.cycles.size(); ++i) {
    const auto& c = schedule.cycles[i];
    std::ostringstream where;
    where << label << " cycle " << c.k;
    if (!std::isfinite(c.red_start_s) || !std::isfinite(c.cycle_length_s) ||
        !std::isfinite(c.green_start_s) || !std::isfinite(c.green_duration_s)) {
      throw Error("invalid_cycle", where.str() + ": non-finite timing");
    }
    if (!(c.green_duration_s > 0.0)) throw Error("invalid_cycle", where.str() + ": green must be > 0");
    if (c.green_duration_s >= c.cycle_length_s) {
      throw Error("green_ge_cycle", where.str() + ": green >= cycle");
    }
    if (c.green_start_s < c.red_start_s - kContiguityTolerance ||
        c.green_end_s() > c.end_s() + kContiguityTolerance) {
      throw Error("invalid_cycle", where.str() + ": green window outside cycle");
    }
    if (i == 0) continue;
    const auto& prev = schedule.cycles[i - 1];
    if (c.k != prev.k + 1) throw Error("invalid_cycle", where.str() + ": cycle index not consecutive");
    const double diff = c.red_start_s - prev.end_s();
    if (diff > kContiguityTolerance) throw Error("gap", where.str() + ": gap after previous cycle");
    if (diff < -kContiguityTolerance) throw Error("overlap", where.str() + ": overlaps previous cycle");
  }
}

}  // namespace

ValidatedPlan validate_signal_plan(SignalPlan plan) {
  if (plan.phases.empty()) throw Error("empty_plan", "signal plan has no phases");
  std::set<PhaseId> seen;
  for (const auto& schedule : plan.phases) {
    if (!seen.insert(schedule.config.phase_id).second) {
      throw Error("duplicate_phase", phase_label(schedule.config.phase_id) + " listed twice");
    }
    validate_phase(schedule);
  }
  return ValidatedPlan(std::move(plan));
}

bool ValidatedPlan::has_phase(PhaseId id) const {
  return std::any_of(plan_.phases.begin(), plan_.phases.end(),
                     [id](const PhaseSchedule& s) { return s.config.phase_id == id; });
}

const PhaseSchedule& ValidatedPlan::phase(PhaseId id) const {
  for (const auto& s : plan_.phases) {
    if (s.config.phase_id == id) return s;
  }
  throw Error("unknown_phase", phase_label(id) + " not in signal plan");
}

std::vector<PhaseConfig> ValidatedPlan::phase_configs() const {
  std::vector<PhaseConfig> out;
  out.reserve(plan_.phases.size());
  for (const auto& s : plan_.phases) out.push_back(s.config);
  return out;
}

const CycleTiming* ValidatedPlan::find_cycle(PhaseId id, double time_s) const {
  const auto& cycles = phase(id).cycles;
  if (!(time_s >= cycles.front().red_start_s) || !(time_s < cycles.back().end_s())) return nullptr;
  // First cycle whose red start is strictly after t, then step back one.
  auto it = std::upper_bound(cycles.begin(), cycles.end(), time_s,
                             [](double t, const CycleTiming& c) { return t < c.red_start_s; });
  return &*std::prev(it);
}

const CycleTiming* ValidatedPlan::cycle(PhaseId id, int k) const {
  const auto& cycles = phase(id).cycles;
  const int offset = k - cycles.front().k;
  if (offset < 0 || offset >= static_cast<int>(cycles.size())) return nullptr;
  return &cycles[static_cast<std::size_t>(offset)];
}

int locate_cycle(const ValidatedPlan& plan, PhaseId phase_id, double time_s) {
  const CycleTiming* c = plan.find_cycle(phase_id, time_s);
  if (c == nullptr) {
    std::ostringstream msg;
    msg << "time " << time_s << " s outside signal plan horizon of " << phase_label(phase_id);
    throw Error("out_of_horizon", msg.str());
  }
  return c->k;
}

}  // namespace sigdemand
