// Command-line front end: simulate, calibrate, estimate, evaluate, sweep.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sigdemand/evaluation.hpp"
#include "sigdemand/io.hpp"
#include "sigdemand/pipeline.hpp"

namespace fs = std::filesystem;
using namespace sigdemand;

namespace {

int report_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return 1;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  for (const auto& m : split_list(text)) out.push_back(parse_method(m));
  if (out.empty()) throw Error("invalid_argument", "no methods given");
  return out;
}

ScenarioConfig scenario_from(const std::string& arg) {
  if (arg.empty() || arg == "reference") return reference_scenario();
  return io::load_scenario(arg);
}

std::vector<Trajectory> load_all(const std::vector<std::string>& paths) {
  std::vector<Trajectory> out;
  for (const auto& p : paths) {
    auto part = io::load_trajectories(p);
    for (auto& t : part) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-level traffic demand estimation from sparse CV trajectories"};
  app.require_subcommand(1);

  // simulate
  std::string sim_scenario;
  std::string sim_out = "sim_out";
  double sim_penetration = -1.0;
  std::int64_t sim_seed = -1;
  std::uint64_t sim_sample_seed = 1;
  auto* sim = app.add_subcommand("simulate", "Simulate a scenario: plan, CV trajectories, truth");
  sim->add_option("--scenario", sim_scenario, "Scenario JSON, or 'reference'");
  sim->add_option("--out", sim_out, "Output directory");
  sim->add_option("--penetration", sim_penetration, "CV penetration override in [0, 1]");
  sim->add_option("--seed", sim_seed, "Simulation seed override");
  sim->add_option("--sample-seed", sim_sample_seed, "Seed of the CV draw");

  // calibrate
  std::string cal_plan;
  std::vector<std::string> cal_traj;
  std::string cal_out = "calibration";
  double cal_headway = 0.0;
  auto* cal = app.add_subcommand("calibrate", "Build profile and prior caches from historical CVs");
  cal->add_option("--plan", cal_plan, "Signal plan JSON")->required();
  cal->add_option("--trajectories", cal_traj, "Historical CV trajectory CSV(s)")->required();
  cal->add_option("--out", cal_out, "Output directory");
  cal->add_option("--sat-headway", cal_headway, "Saturation headway (s) instead of fitting it");

  // estimate
  std::string est_plan, est_traj, est_prior, est_profile;
  std::string est_methods = "WMLE,JO-MLE,JO-MAP";
  std::string est_out = "estimates.csv";
  int est_regroup = 0;
  auto* est = app.add_subcommand("estimate", "Estimate cycle demands from CV trajectories");
  est->add_option("--plan", est_plan, "Signal plan JSON")->required();
  est->add_option("--trajectories", est_traj, "CV trajectory CSV")->required();
  est->add_option("--prior", est_prior, "Prior cache JSON")->required();
  est->add_option("--profile", est_profile, "Profile cache JSON (uniform when omitted)");
  est->add_option("--methods", est_methods, "Comma-separated methods");
  est->add_option("--out", est_out, "Estimates CSV path");
  est->add_option("--regroup", est_regroup,
                  "Round-robin a single-phase record into this many pseudo-phases");

  // evaluate
  std::string ev_estimates, ev_truth, ev_out;
  int ev_regroup = 0;
  auto* ev = app.add_subcommand("evaluate", "Score estimates against ground truth");
  ev->add_option("--estimates", ev_estimates, "Estimates CSV")->required();
  ev->add_option("--truth", ev_truth, "Ground-truth CSV")->required();
  ev->add_option("--out", ev_out, "Metrics JSON path (stdout when omitted)");
  ev->add_option("--regroup", ev_regroup, "Regroup the truth table like the estimates");

  // sweep
  std::string sw_scenario;
  std::string sw_penetrations = "0.02,0.05,0.1,0.2,0.3,0.5,1";
  std::string sw_seeds = "1,2,3,4,5,6,7,8,9,10";
  std::string sw_methods = "WMLE,JO-MLE,JO-MAP";
  std::string sw_out = "sweep_out";
  unsigned sw_threads = 0;
  int sw_hist = 10;
  auto* sw = app.add_subcommand("sweep", "Penetration-rate experiment");
  sw->add_option("--scenario", sw_scenario, "Scenario JSON, or 'reference'");
  sw->add_option("--penetrations", sw_penetrations, "Comma-separated fractions");
  sw->add_option("--seeds", sw_seeds, "Comma-separated CV sampling seeds");
  sw->add_option("--methods", sw_methods, "Comma-separated methods");
  sw->add_option("--out", sw_out, "Output directory");
  sw->add_option("--threads", sw_threads, "Worker threads (0: all cores)");
  sw->add_option("--historical-samples", sw_hist, "Historical CV draws per penetration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what()) + 1;
  }

  try {
    if (sim->parsed()) {
      ScenarioConfig scenario = scenario_from(sim_scenario);
      if (sim_penetration >= 0.0) scenario.penetration = sim_penetration;
      if (sim_seed >= 0) scenario.seed = static_cast<std::uint64_t>(sim_seed);
      validate_scenario(scenario);
      const SimulationResult result = simulate_intersection(scenario);
      const auto cvs = sample_cvs(result.trajectories, scenario.penetration, sim_sample_seed);
      const fs::path out(sim_out);
      io::save_signal_plan(result.plan, out / "plan.json");
      io::save_trajectories(cvs, out / "trajectories.csv");
      io::save_truth(result.truth, out / "truth.csv");
      io::save_scenario(scenario, out / "scenario.json");
      std::cout << "vehicles " << result.vehicles.size() << ", CVs " << cvs.size() << " -> "
                << out.string() << "\n";
    } else if (cal->parsed()) {
      const ValidatedPlan plan = io::load_signal_plan(cal_plan);
      const auto history = load_all(cal_traj);
      CalibrationOptions opts;
      if (cal_headway > 0.0) opts.sat_headway_s = cal_headway;
      const Calibration c = calibrate(plan, history, opts);
      const fs::path out(cal_out);
      io::save_profiles(c.profiles, out / "profile.json");
      io::save_prior(c.prior, out / "prior.json");
      std::cout << "saturation headway " << c.sat_headway_s << " s, lambda0 upper "
                << c.prior.lambda0_upper << " veh/s"
                << (c.prior.flat_fallback ? " (flat share prior)" : "") << "\n";
    } else if (est->parsed()) {
      ValidatedPlan plan = io::load_signal_plan(est_plan);
      auto cvs = io::load_trajectories(est_traj);
      if (est_regroup > 0) {
        RegroupedInput r = regroup_round_robin(plan, cvs, est_regroup);
        plan = std::move(r.plan);
        cvs = std::move(r.trajectories);
      }
      std::vector<ArrivalProfile> profiles;
      if (!est_profile.empty()) profiles = io::load_profiles(est_profile);
      const Calibration c = calibration_from_cache(plan, profiles, io::load_prior(est_prior));
      EstimateOptions opts;
      opts.methods = parse_methods(est_methods);
      const EstimationResult result = estimate_demands(plan, cvs, c, opts);
      io::save_estimates(result.estimates, est_out);
      std::cout << result.estimates.size() << " estimates -> " << est_out << "\n";
    } else if (ev->parsed()) {
      const auto estimates = io::load_estimates(ev_estimates);
      GroundTruth truth = io::load_truth(ev_truth);
      if (ev_regroup > 0) truth = regroup_truth(truth, ev_regroup);
      std::map<int, std::vector<DemandEstimate>> by_method;
      for (const auto& e : estimates) by_method[static_cast<int>(e.method)].push_back(e);
      nlohmann::json j = nlohmann::json::object();
      for (const auto& [m, rows] : by_method) {
        j[std::string(method_name(static_cast<Method>(m)))] =
            nlohmann::json::parse(metrics_json(compute_metrics(rows, truth)));
      }
      const std::string text = j.dump(2) + "\n";
      if (ev_out.empty()) {
        std::cout << text;
      } else {
        io::write_text(ev_out, text);
      }
    } else if (sw->parsed()) {
      SweepConfig config;
      config.scenario = scenario_from(sw_scenario);
      for (const auto& p : split_list(sw_penetrations)) config.penetrations.push_back(std::stod(p));
      for (const auto& s : split_list(sw_seeds)) config.seeds.push_back(std::stoull(s));
      config.methods = parse_methods(sw_methods);
      config.threads = sw_threads;
      config.historical_samples = sw_hist;
      const SweepResult result = run_sweep(config);
      emit_report(result, sw_out);
      std::cout << result.rows.size() << " metric rows -> " << sw_out << "\n";
    }
  } catch (const Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
