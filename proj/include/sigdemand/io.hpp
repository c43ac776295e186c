// File formats: signal plan / scenario / profile / prior JSON, trajectory,
// ground-truth and estimate CSV.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sigdemand/arrival_profile.hpp"
#include "sigdemand/domain.hpp"
#include "sigdemand/estimators.hpp"
#include "sigdemand/prior.hpp"
#include "sigdemand/simulator.hpp"

namespace sigdemand::io {

namespace fs = std::filesystem;

/// Shortest round-trippable decimal text for x ("" never produced).
std::string format_number(double x);

ValidatedPlan parse_signal_plan(const std::string& json_text);
std::string dump_signal_plan(const ValidatedPlan& plan);
ValidatedPlan load_signal_plan(const fs::path& path);
void save_signal_plan(const ValidatedPlan& plan, const fs::path& path);

ScenarioConfig parse_scenario(const std::string& json_text);
std::string dump_scenario(const ScenarioConfig& scenario);
ScenarioConfig load_scenario(const fs::path& path);
void save_scenario(const ScenarioConfig& scenario, const fs::path& path);

inline constexpr const char* kTrajectoryHeader =
    "vehicle_id,phase_id,timestamp_s,distance_to_stopline_m,speed_mps";

/// Rows must be grouped by vehicle with ascending times. Every trajectory
/// is validated. Throws Error("parse_error") / Error("invalid_trajectory").
std::vector<Trajectory> read_trajectories(std::istream& in);
void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> load_trajectories(const fs::path& path);
void save_trajectories(const std::vector<Trajectory>& trajectories, const fs::path& path);

std::vector<ArrivalProfile> load_profiles(const fs::path& path);
void save_profiles(const std::vector<ArrivalProfile>& profiles, const fs::path& path);

PriorSpec load_prior(const fs::path& path);
void save_prior(const PriorSpec& prior, const fs::path& path);

inline constexpr const char* kTruthHeader = "phase_id,cycle_index,demand,volume,initial_queue";
GroundTruth read_truth(std::istream& in);
void write_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth load_truth(const fs::path& path);
void save_truth(const GroundTruth& truth, const fs::path& path);

inline constexpr const char* kEstimateHeader =
    "method,phase_id,cycle_index,demand_veh,lane_rate_vps,lambda0,alpha,status,iterations";

/// One estimate row; lambda0 / alpha are empty for WMLE and failed rows.
std::string estimate_row(const DemandEstimate& e);
std::vector<DemandEstimate> read_estimates(std::istream& in);
void write_estimates(std::ostream& out, const std::vector<DemandEstimate>& estimates);
std::vector<DemandEstimate> load_estimates(const fs::path& path);
void save_estimates(const std::vector<DemandEstimate>& estimates, const fs::path& path);

std::string read_text(const fs::path& path);
/// Creates parent directories. Throws Error("io_error") when unwritable.
void write_text(const fs::path& path, const std::string& text);

}  // namespace sigdemand::io
