#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sigdemand/evaluation.hpp"
#include "sigdemand/io.hpp"

using namespace sigdemand;
namespace fs = std::filesystem;

namespace {

DemandEstimate est(PhaseId z, int k, double d, bool ok = true) {
  DemandEstimate e;
  e.phase_id = z;
  e.cycle_index = k;
  e.demand_veh = d;
  e.status = ok ? EstimateStatus::Ok : EstimateStatus::Failed;
  return e;
}

ScenarioConfig small_scenario() {
  ScenarioConfig s = reference_scenario();
  s.cycle_count = 12;
  return s;
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(Metrics, PerfectEstimates) {
  GroundTruth t;
  t.rows = {{1, 1, 10, 10, 0}, {1, 2, 20, 20, 0}};
  const auto m = compute_metrics(std::vector{est(1, 1, 10), est(1, 2, 20)}, t);
  EXPECT_EQ(*m.mae_veh, 0.0);
  EXPECT_EQ(*m.mape_frac, 0.0);
  EXPECT_EQ(m.success_rate, 1.0);
}

TEST(Metrics, ErrorArithmetic) {
  GroundTruth t;
  t.rows = {{1, 1, 10, 10, 0}, {2, 1, 20, 20, 0}};
  const auto m = compute_metrics(std::vector{est(1, 1, 12), est(2, 1, 18)}, t);
  EXPECT_DOUBLE_EQ(*m.mae_veh, 2.0);
  EXPECT_DOUBLE_EQ(*m.mape_frac, 0.15);
}

TEST(Metrics, SuccessRate) {
  GroundTruth t;
  std::vector<DemandEstimate> e;
  for (int z = 1; z <= 8; ++z) {
    for (int k = 1; k <= 10; ++k) {
      t.rows.push_back({z, k, 10, 10, 0});
      e.push_back(est(z, k, 10, !(z == 3 && k <= 4)));
    }
  }
  const auto m = compute_metrics(e, t);
  EXPECT_DOUBLE_EQ(m.success_rate, 76.0 / 80.0);
  EXPECT_EQ(m.successes, 76);
}

TEST(Metrics, ZeroDemandAndMisalignment) {
  GroundTruth t;
  t.rows = {{1, 1, 0, 0, 0}, {1, 2, 10, 10, 0}};
  const auto m = compute_metrics(std::vector{est(1, 1, 2), est(1, 2, 10)}, t);
  EXPECT_EQ(m.zero_demand_excluded, 1);
  EXPECT_DOUBLE_EQ(*m.mape_frac, 0.0);
  EXPECT_DOUBLE_EQ(*m.mae_veh, 1.0);
  EXPECT_THROW(compute_metrics(std::vector{est(1, 3, 2)}, t), Error);
  EXPECT_THROW(compute_metrics(std::vector{est(1, 1, 2), est(1, 1, 3)}, t), Error);
  const auto none = compute_metrics(std::vector{est(1, 1, 2, false)}, t);
  EXPECT_FALSE(none.mae_veh);
  EXPECT_FALSE(none.mape_frac);
}

TEST(Sweep, CardinalityAndCoverageRelations) {
  SweepConfig c;
  c.scenario = small_scenario();
  c.penetrations = {0.02, 0.05, 0.1};
  for (std::uint64_t s = 1; s <= 10; ++s) c.seeds.push_back(s);
  const auto r = run_sweep(c);
  ASSERT_EQ(r.rows.size(), 90u);
  for (std::size_t i = 0; i < r.rows.size(); i += 3) {
    const auto& wmle = r.rows[i];
    const auto& jomle = r.rows[i + 1];
    const auto& jomap = r.rows[i + 2];
    ASSERT_EQ(wmle.method, Method::Wmle);
    ASSERT_EQ(jomap.method, Method::JoMap);
    EXPECT_FALSE(jomap.error);
    EXPECT_EQ(jomap.metrics.success_rate, jomle.metrics.success_rate);
    EXPECT_GE(jomap.metrics.success_rate, wmle.metrics.success_rate);
  }
}

TEST(Sweep, ReportFiles) {
  SweepConfig c;
  c.scenario = small_scenario();
  c.penetrations = {0.3, 0.05};
  c.seeds = {4, 9};
  c.threads = 2;
  const auto r = run_sweep(c);
  const fs::path dir = fs::temp_directory_path() / "sigdemand_report_test";
  fs::remove_all(dir);
  emit_report(r, dir);

  EXPECT_EQ(line_count(dir / "estimates.csv"), 1 + 3 * 8 * 12 * 2 * 2);

  std::ifstream mj(dir / "metrics.json");
  const auto j = nlohmann::json::parse(mj);
  ASSERT_EQ(j["cells"].size(), 12u);
  for (const auto& cell : j["cells"]) {
    EXPECT_TRUE(cell.contains("mae"));
    EXPECT_TRUE(cell.contains("mape"));
    EXPECT_TRUE(cell.contains("sr"));
  }

  std::ifstream plot(dir / "plot.csv");
  std::string line;
  std::getline(plot, line);
  EXPECT_EQ(line.rfind("method,penetration,", 0), 0u);
  double prev = -1.0;
  int rows = 0;
  while (std::getline(plot, line)) {
    std::stringstream ss(line);
    std::string method, p;
    std::getline(ss, method, ',');
    std::getline(ss, p, ',');
    EXPECT_GE(std::stod(p), prev);
    prev = std::stod(p);
    ++rows;
  }
  EXPECT_EQ(rows, 6);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  SweepConfig c;
  c.scenario = small_scenario();
  c.penetrations = {0.1, 0.5};
  c.seeds = {1, 2, 3};
  c.threads = 1;
  const auto a = run_sweep(c);
  c.threads = 4;
  const auto b = run_sweep(c);
  const fs::path da = fs::temp_directory_path() / "sigdemand_threads_a";
  const fs::path db = fs::temp_directory_path() / "sigdemand_threads_b";
  emit_report(a, da);
  emit_report(b, db);
  for (const char* f : {"estimates.csv", "metrics.json", "plot.csv"}) {
    EXPECT_EQ(io::read_text(da / f), io::read_text(db / f)) << f;
  }
}

TEST(Sweep, RejectsBadConfig) {
  SweepConfig c;
  c.scenario = small_scenario();
  c.penetrations = {1.2};
  c.seeds = {1};
  EXPECT_THROW(run_sweep(c), Error);
  c.penetrations = {0.1};
  c.methods.clear();
  EXPECT_THROW(run_sweep(c), Error);
}
