#include "sigdemand/io.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace sigdemand::io {

using nlohmann::json;

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << text;
  if (!out) throw Error("io_error", "write failed for " + path.string());
}

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error("parse_error", what + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

template <typename F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error("parse_error", what + ": " + e.what());
  }
}

PhaseConfig phase_config_from(const json& j) {
  PhaseConfig c;
  c.phase_id = j.at("phase_id").get<PhaseId>();
  c.lane_count = get_or(j, "lane_count", c.lane_count);
  c.jam_spacing_m = get_or(j, "jam_spacing_m", c.jam_spacing_m);
  c.free_flow_speed_mps = get_or(j, "free_flow_speed_mps", c.free_flow_speed_mps);
  return c;
}

json phase_config_to(const PhaseConfig& c) {
  return json{{"phase_id", c.phase_id},
              {"lane_count", c.lane_count},
              {"jam_spacing_m", c.jam_spacing_m},
              {"free_flow_speed_mps", c.free_flow_speed_mps}};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error("parse_error", "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

int to_int(const std::string& s, std::size_t line_no) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error("parse_error", "line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
  return v;
}

void expect_header(std::istream& in, const std::string& header) {
  std::string line;
  if (!std::getline(in, line)) throw Error("parse_error", "missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw Error("parse_error", "unexpected CSV header '" + line + "'");
}

template <typename Reader>
auto load_with(const fs::path& path, Reader reader) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  return reader(in);
}

template <typename Writer>
void save_with(const fs::path& path, Writer writer) {
  std::ostringstream out;
  writer(out);
  write_text(path, out.str());
}

}  // namespace

ValidatedPlan parse_signal_plan(const std::string& json_text) {
  const json j = parse_json(json_text, "signal plan");
  SignalPlan plan = guarded("signal plan", [&] {
    SignalPlan p;
    for (const auto& jp : j.at("phases")) {
      PhaseSchedule s;
      s.config = phase_config_from(jp);
      for (const auto& jc : jp.at("cycles")) {
        CycleTiming c;
        c.k = jc.at("k").get<int>();
        c.red_start_s = jc.at("red_start_s").get<double>();
        c.green_start_s = jc.at("green_start_s").get<double>();
        c.green_duration_s = jc.at("green_duration_s").get<double>();
        c.cycle_length_s = jc.at("cycle_length_s").get<double>();
        s.cycles.push_back(c);
      }
      p.phases.push_back(std::move(s));
    }
    return p;
  });
  return validate_signal_plan(std::move(plan));
}

std::string dump_signal_plan(const ValidatedPlan& plan) {
  json phases = json::array();
  for (const auto& s : plan.phases()) {
    json jp = phase_config_to(s.config);
    json cycles = json::array();
    for (const auto& c : s.cycles) {
      cycles.push_back({{"k", c.k},
                        {"red_start_s", c.red_start_s},
                        {"green_start_s", c.green_start_s},
                        {"green_duration_s", c.green_duration_s},
                        {"cycle_length_s", c.cycle_length_s}});
    }
    jp["cycles"] = std::move(cycles);
    phases.push_back(std::move(jp));
  }
  return json{{"phases", phases}}.dump(1) + "\n";
}

ValidatedPlan load_signal_plan(const fs::path& path) { return parse_signal_plan(read_text(path)); }

void save_signal_plan(const ValidatedPlan& plan, const fs::path& path) {
  write_text(path, dump_signal_plan(plan));
}

ScenarioConfig parse_scenario(const std::string& json_text) {
  const json j = parse_json(json_text, "scenario");
  ScenarioConfig s = guarded("scenario", [&] {
    ScenarioConfig s;
    s.name = get_or(j, "name", s.name);
    s.cycle_length_s = get_or(j, "cycle_length_s", s.cycle_length_s);
    s.cycle_count = get_or(j, "cycle_count", s.cycle_count);
    s.start_time_s = get_or(j, "start_time_s", s.start_time_s);
    s.sat_headway_s = get_or(j, "sat_headway_s", s.sat_headway_s);
    s.detection_range_m = get_or(j, "detection_range_m", s.detection_range_m);
    s.report_interval_s = get_or(j, "report_interval_s", s.report_interval_s);
    s.position_noise_std_m = get_or(j, "position_noise_std_m", s.position_noise_std_m);
    s.penetration = get_or(j, "penetration", s.penetration);
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
    s.time_step_s = get_or(j, "time_step_s", s.time_step_s);
    s.max_flush_cycles = get_or(j, "max_flush_cycles", s.max_flush_cycles);
    for (const auto& jp : j.at("phases")) {
      ScenarioPhase p;
      p.config = phase_config_from(jp);
      p.red_offset_s = get_or(jp, "red_offset_s", p.red_offset_s);
      p.green_s = jp.at("green_s").get<double>();
      if (jp.contains("demand")) {
        const auto& jd = jp.at("demand");
        p.demand.mean_veh = get_or(jd, "mean_veh", p.demand.mean_veh);
        p.demand.amplitude = get_or(jd, "amplitude", p.demand.amplitude);
        p.demand.period_cycles = get_or(jd, "period_cycles", p.demand.period_cycles);
        p.demand.phase_shift_rad = get_or(jd, "phase_shift_rad", p.demand.phase_shift_rad);
        p.demand.noise_std_veh = get_or(jd, "noise_std_veh", p.demand.noise_std_veh);
        p.demand.sequence = get_or(jd, "sequence", p.demand.sequence);
      }
      const std::string pattern = get_or<std::string>(jp, "pattern", "random");
      if (pattern == "platoon") {
        p.pattern = ArrivalPattern::Platoon;
      } else if (pattern != "random") {
        throw Error("parse_error", "scenario: unknown arrival pattern '" + pattern + "'");
      }
      if (jp.contains("platoon")) {
        const auto& jw = jp.at("platoon");
        p.platoon.window_start_frac = get_or(jw, "window_start_frac", p.platoon.window_start_frac);
        p.platoon.window_len_frac = get_or(jw, "window_len_frac", p.platoon.window_len_frac);
        p.platoon.inside_mass = get_or(jw, "inside_mass", p.platoon.inside_mass);
      }
      s.phases.push_back(std::move(p));
    }
    return s;
  });
  validate_scenario(s);
  return s;
}

std::string dump_scenario(const ScenarioConfig& s) {
  json phases = json::array();
  for (const auto& p : s.phases) {
    json jp = phase_config_to(p.config);
    jp["red_offset_s"] = p.red_offset_s;
    jp["green_s"] = p.green_s;
    jp["demand"] = {{"mean_veh", p.demand.mean_veh},
                    {"amplitude", p.demand.amplitude},
                    {"period_cycles", p.demand.period_cycles},
                    {"phase_shift_rad", p.demand.phase_shift_rad},
                    {"noise_std_veh", p.demand.noise_std_veh},
                    {"sequence", p.demand.sequence}};
    jp["pattern"] = p.pattern == ArrivalPattern::Platoon ? "platoon" : "random";
    if (p.pattern == ArrivalPattern::Platoon) {
      jp["platoon"] = {{"window_start_frac", p.platoon.window_start_frac},
                       {"window_len_frac", p.platoon.window_len_frac},
                       {"inside_mass", p.platoon.inside_mass}};
    }
    phases.push_back(std::move(jp));
  }
  json j{{"name", s.name},
         {"cycle_length_s", s.cycle_length_s},
         {"cycle_count", s.cycle_count},
         {"start_time_s", s.start_time_s},
         {"sat_headway_s", s.sat_headway_s},
         {"detection_range_m", s.detection_range_m},
         {"report_interval_s", s.report_interval_s},
         {"position_noise_std_m", s.position_noise_std_m},
         {"penetration", s.penetration},
         {"seed", s.seed},
         {"time_step_s", s.time_step_s},
         {"max_flush_cycles", s.max_flush_cycles},
         {"phases", phases}};
  return j.dump(2) + "\n";
}

ScenarioConfig load_scenario(const fs::path& path) { return parse_scenario(read_text(path)); }

void save_scenario(const ScenarioConfig& scenario, const fs::path& path) {
  write_text(path, dump_scenario(scenario));
}

std::vector<Trajectory> read_trajectories(std::istream& in) {
  expect_header(in, kTrajectoryHeader);
  std::vector<Trajectory> out;
  std::unordered_set<std::string> finished;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 5) {
      throw Error("parse_error", "line " + std::to_string(line_no) + ": expected 5 fields");
    }
    if (out.empty() || out.back().vehicle_id != f[0]) {
      if (!out.empty()) finished.insert(out.back().vehicle_id);
      if (finished.count(f[0]) != 0) {
        throw Error("parse_error", "line " + std::to_string(line_no) + ": rows of vehicle " + f[0] +
                                       " are not grouped");
      }
      Trajectory t;
      t.vehicle_id = f[0];
      t.phase_id = to_int(f[1], line_no);
      out.push_back(std::move(t));
    }
    auto& t = out.back();
    if (to_int(f[1], line_no) != t.phase_id) {
      throw Error("parse_error", "line " + std::to_string(line_no) + ": vehicle " + f[0] +
                                     " changes phase");
    }
    t.points.push_back({to_double(f[2], line_no), to_double(f[3], line_no), to_double(f[4], line_no)});
  }
  for (const auto& t : out) validate_trajectory(t);
  return out;
}

void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajectories) {
  out << kTrajectoryHeader << '\n';
  for (const auto& t : trajectories) {
    for (const auto& p : t.points) {
      out << t.vehicle_id << ',' << t.phase_id << ',' << format_number(p.timestamp_s) << ','
          << format_number(p.distance_to_stopline_m) << ',' << format_number(p.speed_mps) << '\n';
    }
  }
}

std::vector<Trajectory> load_trajectories(const fs::path& path) {
  return load_with(path, [](std::istream& in) { return read_trajectories(in); });
}

void save_trajectories(const std::vector<Trajectory>& trajectories, const fs::path& path) {
  save_with(path, [&](std::ostream& out) { write_trajectories(out, trajectories); });
}

std::vector<ArrivalProfile> load_profiles(const fs::path& path) {
  const json j = parse_json(read_text(path), "profile cache");
  return guarded("profile cache", [&] {
    std::vector<ArrivalProfile> out;
    const json& arr = j.is_array() ? j : json::array({j});
    for (const auto& jp : arr) {
      ArrivalProfile p;
      p.phase_id = jp.at("phase_id").get<PhaseId>();
      p.bin_values = jp.at("bin_values").get<std::vector<double>>();
      p.floor_epsilon = get_or(jp, "floor_epsilon", p.floor_epsilon);
      if (p.bin_values.empty()) throw Error("parse_error", "profile with no bins");
      out.push_back(std::move(p));
    }
    return out;
  });
}

void save_profiles(const std::vector<ArrivalProfile>& profiles, const fs::path& path) {
  json arr = json::array();
  for (const auto& p : profiles) {
    arr.push_back({{"phase_id", p.phase_id},
                   {"bin_values", p.bin_values},
                   {"floor_epsilon", p.floor_epsilon}});
  }
  write_text(path, arr.dump(2) + "\n");
}

PriorSpec load_prior(const fs::path& path) {
  const json j = parse_json(read_text(path), "prior cache");
  return guarded("prior cache", [&] {
    PriorSpec p;
    for (const auto& jp : j.at("phases")) {
      PhasePrior pp;
      pp.phase_id = jp.at("phase_id").get<PhaseId>();
      pp.mean_share = jp.at("mu").get<double>();
      pp.variance = jp.at("sigma2").get<double>();
      if (!(pp.variance > 0.0)) throw Error("parse_error", "prior variance must be > 0");
      p.phases.push_back(pp);
    }
    p.lambda0_upper = j.at("lambda0_upper").get<double>();
    if (!(p.lambda0_upper > 0.0)) throw Error("parse_error", "lambda0_upper must be > 0");
    p.sample_count = get_or(j, "sample_count", 0);
    p.flat_fallback = get_or(j, "flat_fallback", false);
    return p;
  });
}

void save_prior(const PriorSpec& prior, const fs::path& path) {
  json phases = json::array();
  for (const auto& p : prior.phases) {
    phases.push_back({{"phase_id", p.phase_id}, {"mu", p.mean_share}, {"sigma2", p.variance}});
  }
  json j{{"phases", phases},
         {"lambda0_upper", prior.lambda0_upper},
         {"sample_count", prior.sample_count},
         {"flat_fallback", prior.flat_fallback}};
  write_text(path, j.dump(2) + "\n");
}

GroundTruth read_truth(std::istream& in) {
  expect_header(in, kTruthHeader);
  GroundTruth truth;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 5) {
      throw Error("parse_error", "line " + std::to_string(line_no) + ": expected 5 fields");
    }
    truth.rows.push_back({to_int(f[0], line_no), to_int(f[1], line_no), to_int(f[2], line_no),
                          to_int(f[3], line_no), to_int(f[4], line_no)});
  }
  return truth;
}

void write_truth(std::ostream& out, const GroundTruth& truth) {
  out << kTruthHeader << '\n';
  for (const auto& r : truth.rows) {
    out << r.phase_id << ',' << r.cycle_index << ',' << r.demand << ',' << r.volume << ','
        << r.initial_queue << '\n';
  }
}

GroundTruth load_truth(const fs::path& path) {
  return load_with(path, [](std::istream& in) { return read_truth(in); });
}

void save_truth(const GroundTruth& truth, const fs::path& path) {
  save_with(path, [&](std::ostream& out) { write_truth(out, truth); });
}

std::string estimate_row(const DemandEstimate& e) {
  std::ostringstream out;
  out << method_name(e.method) << ',' << e.phase_id << ',' << e.cycle_index << ',';
  if (e.ok()) out << format_number(e.demand_veh) << ',' << format_number(e.lane_rate_vps);
  else out << ',';
  out << ',';
  if (e.ok() && e.lambda0) out << format_number(*e.lambda0);
  out << ',';
  if (e.ok() && e.alpha) out << format_number(*e.alpha);
  out << ',' << (e.ok() ? "ok" : "failed") << ',' << e.iterations;
  return out.str();
}

std::vector<DemandEstimate> read_estimates(std::istream& in) {
  expect_header(in, kEstimateHeader);
  std::vector<DemandEstimate> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 9) {
      throw Error("parse_error", "line " + std::to_string(line_no) + ": expected 9 fields");
    }
    DemandEstimate e;
    e.method = parse_method(f[0]);
    e.phase_id = to_int(f[1], line_no);
    e.cycle_index = to_int(f[2], line_no);
    if (f[7] == "ok") {
      e.status = EstimateStatus::Ok;
    } else if (f[7] != "failed") {
      throw Error("parse_error", "line " + std::to_string(line_no) + ": bad status '" + f[7] + "'");
    }
    if (e.ok()) {
      e.demand_veh = to_double(f[3], line_no);
      e.lane_rate_vps = to_double(f[4], line_no);
    }
    if (!f[5].empty()) e.lambda0 = to_double(f[5], line_no);
    if (!f[6].empty()) e.alpha = to_double(f[6], line_no);
    e.iterations = to_int(f[8], line_no);
    out.push_back(e);
  }
  return out;
}

void write_estimates(std::ostream& out, const std::vector<DemandEstimate>& estimates) {
  out << kEstimateHeader << '\n';
  for (const auto& e : estimates) out << estimate_row(e) << '\n';
}

std::vector<DemandEstimate> load_estimates(const fs::path& path) {
  return load_with(path, [](std::istream& in) { return read_estimates(in); });
}

void save_estimates(const std::vector<DemandEstimate>& estimates, const fs::path& path) {
  save_with(path, [&](std::ostream& out) { write_estimates(out, estimates); });
}

}  // namespace sigdemand::io
