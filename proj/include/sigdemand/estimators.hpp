// Demand estimators: single-phase weighted MLE (WMLE), joint MLE with fixed
// prior shares (JO-MLE) and the joint MAP estimator (JO-MAP).
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigdemand/domain.hpp"
#include "sigdemand/prior.hpp"
#include "sigdemand/trajectory_prep.hpp"

namespace sigdemand {

enum class Method { Wmle, JoMle, JoMap };

std::string_view method_name(Method m);
/// Accepts "WMLE", "JO-MLE", "JO-MAP" (case-insensitive, '_' for '-').
Method parse_method(std::string_view name);

/// Per-phase constants of the posterior for one cycle.
struct PhaseStats {
  PhaseId phase_id = 0;
  int lane_count = 1;
  /// sum_j omega_j n_j
  double weighted_count = 0.0;
  /// sum_j omega_j Lambda(t_j) / u
  double weighted_exposure = 0.0;
  int observation_count = 0;
};

/// Observations must already be adjusted for the initial queue and
/// weighted; raw_weight is Lambda(t_j).
PhaseStats sufficient_stats(PhaseId phase_id, std::span<const ArrivalObservation> weighted,
                            int lane_count);

enum class EstimateStatus { Ok, Failed };

struct DemandEstimate {
  Method method = Method::JoMap;
  PhaseId phase_id = 0;
  int cycle_index = 0;
  EstimateStatus status = EstimateStatus::Failed;
  double demand_veh = 0.0;
  double lane_rate_vps = 0.0;
  std::optional<double> lambda0;
  std::optional<double> alpha;
  int iterations = 0;

  bool ok() const { return status == EstimateStatus::Ok; }
};

/// Log posterior of (lambda0, shares) up to theta-independent constants
/// (ln n!, the uniform density, Gaussian normalizers). The simplex equality
/// is not enforced here. -inf outside the support.
double log_posterior(double lambda0, std::span<const double> shares,
                     std::span<const PhaseStats> stats, const PriorSpec& prior);

struct PosteriorGradient {
  double d_lambda0 = 0.0;
  std::vector<double> d_shares;
};

/// Analytic partial derivatives of log_posterior (stationarity residuals
/// without the multiplier term).
PosteriorGradient posterior_gradient(double lambda0, std::span<const double> shares,
                                     std::span<const PhaseStats> stats, const PriorSpec& prior);

/// Closed-form maximizer of the single-phase weighted likelihood:
/// lambda = sum w n / sum w Lambda. Fails when there are no observations.
DemandEstimate wmle(PhaseId phase_id, int cycle_index, std::span<const ArrivalObservation> weighted,
                    int lane_count, double cycle_length_s);

struct ThetaEstimate {
  double lambda0 = 0.0;
  std::vector<double> shares;
  double multiplier = 0.0;
  bool converged = false;
  bool at_boundary = false;
  int iterations = 0;
  double residual_norm = 0.0;
};

struct JointEstimate {
  bool ok = false;
  ThetaEstimate theta;
  std::vector<DemandEstimate> demands;
};

/// Joint MLE with the shares fixed at the prior means:
/// lambda0 = sum N / sum (W mu), clamped to the support.
JointEstimate jomle(std::span<const PhaseStats> stats, const PriorSpec& prior,
                    std::span<const double> cycle_lengths_s, int cycle_index);

/// Non-negative root of -a^2/s2 + (mu/s2 - lambda0 W - delta) a + N = 0.
double alpha_positive_root(double lambda0, double delta, double mu, double sigma2,
                           double weighted_count, double weighted_exposure);

struct SolverConfig {
  double tolerance = 1e-8;
  int max_iterations = 200;
  int max_halvings = 30;
};

/// MAP estimate. Solves the stationarity system reduced to (lambda0, delta)
/// by damped Newton; lambda0 is boxed to the prior support.
JointEstimate jomap(std::span<const PhaseStats> stats, const PriorSpec& prior,
                    std::span<const double> cycle_lengths_s, int cycle_index,
                    const SolverConfig& cfg = {});

}  // namespace sigdemand
