#include "sigdemand/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sigdemand/io.hpp"
#include "sigdemand/pipeline.hpp"

namespace sigdemand {

Metrics compute_metrics(std::span<const DemandEstimate> estimates, const GroundTruth& truth) {
  std::map<std::pair<PhaseId, int>, const GroundTruthRow*> lookup;
  for (const auto& r : truth.rows) lookup[{r.phase_id, r.cycle_index}] = &r;

  Metrics m;
  double abs_sum = 0.0;
  double pct_sum = 0.0;
  int pct_count = 0;
  std::set<std::pair<PhaseId, int>> seen;
  for (const auto& e : estimates) {
    const auto key = std::make_pair(e.phase_id, e.cycle_index);
    const auto it = lookup.find(key);
    if (it == lookup.end()) {
      throw Error("misaligned", "no ground truth for phase " + std::to_string(e.phase_id) +
                                    " cycle " + std::to_string(e.cycle_index));
    }
    if (!seen.insert(key).second) {
      throw Error("misaligned", "duplicate estimate for phase " + std::to_string(e.phase_id) +
                                    " cycle " + std::to_string(e.cycle_index));
    }
    ++m.total;
    if (!e.ok()) continue;
    ++m.successes;
    const double truth_d = it->second->demand;
    const double err = std::abs(e.demand_veh - truth_d);
    abs_sum += err;
    if (truth_d > 0.0) {
      pct_sum += err / truth_d;
      ++pct_count;
    } else {
      ++m.zero_demand_excluded;
    }
  }
  if (m.successes > 0) m.mae_veh = abs_sum / m.successes;
  if (pct_count > 0) m.mape_frac = pct_sum / pct_count;
  m.success_rate = m.total > 0 ? static_cast<double>(m.successes) / m.total : 0.0;
  return m;
}

namespace {

template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct CellOutput {
  std::vector<SweepRow> rows;
  std::vector<SweepRecord> records;
};

}  // namespace

SweepResult run_sweep(const SweepConfig& config) {
  validate_scenario(config.scenario);
  if (config.methods.empty()) throw Error("invalid_argument", "no methods requested");
  for (double p : config.penetrations) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("invalid_argument", "penetration outside [0, 1]");
  }

  const SimulationResult population = simulate_intersection(config.scenario);
  ScenarioConfig hist_scenario = config.scenario;
  hist_scenario.seed = config.scenario.seed + config.historical_seed_offset;
  const SimulationResult history = simulate_intersection(hist_scenario);

  const std::size_t np = config.penetrations.size();
  std::vector<std::optional<Calibration>> calibrations(np);
  std::vector<std::string> calibration_errors(np);
  parallel_for(np, config.threads, [&](std::size_t i) {
    std::vector<Trajectory> pooled;
    for (int s = 0; s < config.historical_samples; ++s) {
      auto sample = sample_cvs(history.trajectories, config.penetrations[i],
                               config.historical_sample_seed_base + static_cast<std::uint64_t>(s));
      for (auto& t : sample) pooled.push_back(std::move(t));
    }
    try {
      calibrations[i] = calibrate(history.plan, pooled);
    } catch (const Error& e) {
      calibration_errors[i] = e.kind() + ": " + e.what();
    }
  });

  const std::size_t ns = config.seeds.size();
  std::vector<CellOutput> cells(np * ns);
  parallel_for(np * ns, config.threads, [&](std::size_t c) {
    const std::size_t pi = c / ns;
    const double p = config.penetrations[pi];
    const std::uint64_t seed = config.seeds[c % ns];
    CellOutput& out = cells[c];

    std::optional<std::string> error;
    EstimationResult est;
    if (!calibrations[pi]) {
      error = calibration_errors[pi];
    } else {
      try {
        const auto cvs = sample_cvs(population.trajectories, p, seed);
        EstimateOptions opts;
        opts.methods = config.methods;
        est = estimate_demands(population.plan, cvs, *calibrations[pi], opts);
      } catch (const Error& e) {
        error = e.kind() + ": " + e.what();
      }
    }
    for (const Method m : config.methods) {
      std::vector<DemandEstimate> mine;
      if (error) {
        for (const auto& r : population.truth.rows) {
          DemandEstimate d;
          d.method = m;
          d.phase_id = r.phase_id;
          d.cycle_index = r.cycle_index;
          mine.push_back(d);
        }
      } else {
        for (const auto& e : est.estimates) {
          if (e.method == m) mine.push_back(e);
        }
      }
      SweepRow row;
      row.method = m;
      row.penetration = p;
      row.seed = seed;
      row.error = error;
      row.metrics = compute_metrics(mine, population.truth);
      out.rows.push_back(row);
    }
    if (!error) {
      for (const auto& e : est.estimates) out.records.push_back({p, seed, e});
    }
  });

  SweepResult result;
  for (auto& c : cells) {
    for (auto& r : c.rows) result.rows.push_back(std::move(r));
    for (auto& r : c.records) result.records.push_back(std::move(r));
  }
  return result;
}

namespace {

struct MeanStd {
  std::optional<double> mean;
  std::optional<double> stddev;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  out.mean = mean;
  out.stddev = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
  return out;
}

int method_rank(Method m) { return static_cast<int>(m); }

}  // namespace

std::vector<AggregateRow> aggregate(const SweepResult& result) {
  std::map<std::pair<double, int>, std::vector<const SweepRow*>> groups;
  for (const auto& r : result.rows) groups[{r.penetration, method_rank(r.method)}].push_back(&r);

  std::vector<AggregateRow> out;
  for (const auto& [key, rows] : groups) {
    AggregateRow a;
    a.penetration = key.first;
    a.method = static_cast<Method>(key.second);
    a.cells = static_cast<int>(rows.size());
    std::vector<double> mae, mape, sr;
    for (const auto* r : rows) {
      if (r->metrics.mae_veh) mae.push_back(*r->metrics.mae_veh);
      if (r->metrics.mape_frac) mape.push_back(*r->metrics.mape_frac);
      sr.push_back(r->metrics.success_rate);
    }
    const auto m1 = mean_std(mae);
    const auto m2 = mean_std(mape);
    const auto m3 = mean_std(sr);
    a.mae_mean = m1.mean;
    a.mae_std = m1.stddev;
    a.mape_mean = m2.mean;
    a.mape_std = m2.stddev;
    a.sr_mean = m3.mean.value_or(0.0);
    a.sr_std = m3.stddev.value_or(0.0);
    out.push_back(a);
  }
  return out;
}

const AggregateRow* find_aggregate(std::span<const AggregateRow> rows, Method method,
                                   double penetration) {
  for (const auto& r : rows) {
    if (r.method == method && std::abs(r.penetration - penetration) < 1e-12) return &r;
  }
  return nullptr;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json metrics_object(const Metrics& m) {
  return {{"mae", optional_number(m.mae_veh)},
          {"mape", optional_number(m.mape_frac)},
          {"sr", m.success_rate},
          {"total", m.total},
          {"successes", m.successes},
          {"zero_demand_excluded", m.zero_demand_excluded}};
}

std::string optional_text(const std::optional<double>& v) {
  return v ? io::format_number(*v) : std::string();
}

}  // namespace

std::string metrics_json(const Metrics& metrics) { return metrics_object(metrics).dump(2) + "\n"; }

void emit_report(const SweepResult& result, const std::filesystem::path& out_dir) {
  std::ostringstream est;
  est << "penetration,seed," << io::kEstimateHeader << '\n';
  for (const auto& r : result.records) {
    est << io::format_number(r.penetration) << ',' << r.seed << ',' << io::estimate_row(r.estimate)
        << '\n';
  }
  io::write_text(out_dir / "estimates.csv", est.str());

  nlohmann::json cells = nlohmann::json::array();
  for (const auto& r : result.rows) {
    nlohmann::json cell = metrics_object(r.metrics);
    cell["method"] = std::string(method_name(r.method));
    cell["penetration"] = r.penetration;
    cell["seed"] = r.seed;
    if (r.error) cell["error"] = *r.error;
    cells.push_back(std::move(cell));
  }
  io::write_text(out_dir / "metrics.json", nlohmann::json{{"cells", cells}}.dump(2) + "\n");

  std::ostringstream plot;
  plot << "method,penetration,cells,mae_mean,mae_std,mape_mean,mape_std,sr_mean,sr_std\n";
  for (const auto& a : aggregate(result)) {
    plot << method_name(a.method) << ',' << io::format_number(a.penetration) << ',' << a.cells << ','
         << optional_text(a.mae_mean) << ',' << optional_text(a.mae_std) << ','
         << optional_text(a.mape_mean) << ',' << optional_text(a.mape_std) << ','
         << io::format_number(a.sr_mean) << ',' << io::format_number(a.sr_std) << '\n';
  }
  io::write_text(out_dir / "plot.csv", plot.str());
}

}  // namespace sigdemand
