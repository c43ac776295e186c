#include <gtest/gtest.h>

#include "sigdemand/domain.hpp"
#include "support.hpp"

using namespace sigdemand;
using sigdemand::testing::phase_config;
using sigdemand::testing::uniform_plan;

namespace {

SignalPlan two_cycle_plan(double second_red, double green) {
  PhaseSchedule s;
  s.config = phase_config(1);
  s.cycles.push_back({1, 0.0, 100.0 - green, green, 100.0});
  s.cycles.push_back({2, second_red, second_red + 100.0 - green, green, 100.0});
  SignalPlan plan;
  plan.phases.push_back(s);
  return plan;
}

std::string error_kind(const SignalPlan& plan) {
  try {
    validate_signal_plan(plan);
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

}  // namespace

TEST(SignalPlan, ContiguousCyclesAccepted) {
  const ValidatedPlan plan = validate_signal_plan(two_cycle_plan(100.0, 40.0));
  EXPECT_EQ(plan.phase(1).cycles.size(), 2u);
}

TEST(SignalPlan, GapAndOverlapRejected) {
  EXPECT_EQ(error_kind(two_cycle_plan(110.0, 40.0)), "gap");
  EXPECT_EQ(error_kind(two_cycle_plan(95.0, 40.0)), "overlap");
}

TEST(SignalPlan, GreenAsLongAsCycleRejected) {
  EXPECT_EQ(error_kind(two_cycle_plan(100.0, 100.0)), "green_ge_cycle");
}

TEST(SignalPlan, ContiguityToleranceIsOneNanosecond) {
  EXPECT_EQ(error_kind(two_cycle_plan(100.0 + 5e-10, 40.0)), "");
  EXPECT_EQ(error_kind(two_cycle_plan(100.0 + 5e-9, 40.0)), "gap");
}

TEST(SignalPlan, DuplicatePhaseRejected) {
  SignalPlan plan = two_cycle_plan(100.0, 40.0);
  plan.phases.push_back(plan.phases.front());
  EXPECT_EQ(error_kind(plan), "duplicate_phase");
}

TEST(LocateCycle, HalfOpenIntervals) {
  const ValidatedPlan plan = validate_signal_plan(two_cycle_plan(100.0, 40.0));
  EXPECT_EQ(locate_cycle(plan, 1, 150.0), 2);
  EXPECT_EQ(locate_cycle(plan, 1, 100.0), 2);
  EXPECT_EQ(locate_cycle(plan, 1, 0.0), 1);
  EXPECT_EQ(locate_cycle(plan, 1, 99.999999), 1);
}

TEST(LocateCycle, OutsideHorizonThrows) {
  const ValidatedPlan plan = validate_signal_plan(two_cycle_plan(100.0, 40.0));
  try {
    locate_cycle(plan, 1, 250.0);
    FAIL() << "expected out_of_horizon";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "out_of_horizon");
  }
  EXPECT_THROW(locate_cycle(plan, 1, 200.0), Error);
  EXPECT_THROW(locate_cycle(plan, 1, -0.5), Error);
}

TEST(LocateCycle, PiecewiseConstantWithBreaksAtRedStarts) {
  const ValidatedPlan plan = uniform_plan({phase_config(1)}, 6, 90.0, 35.0, 12.5);
  for (double t = 12.5; t < 12.5 + 6 * 90.0; t += 0.37) {
    const int k = locate_cycle(plan, 1, t);
    const CycleTiming* c = plan.cycle(1, k);
    ASSERT_NE(c, nullptr);
    EXPECT_LE(c->red_start_s, t);
    EXPECT_LT(t, c->end_s());
  }
}

TEST(Trajectory, ValidationRejectsBadSamples) {
  using sigdemand::testing::make_trajectory;
  EXPECT_NO_THROW(validate_trajectory(make_trajectory({{0, 10, 1}, {1, 9, 1}})));
  EXPECT_THROW(validate_trajectory(make_trajectory({{0, 10, 1}})), Error);
  EXPECT_THROW(validate_trajectory(make_trajectory({{0, 10, 1}, {0, 9, 1}})), Error);
  EXPECT_THROW(validate_trajectory(make_trajectory({{0, 10, 1}, {1, 9, -1}})), Error);
}
