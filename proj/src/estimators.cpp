#include "sigdemand/estimators.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>

namespace sigdemand {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Wmle:
      return "WMLE";
    case Method::JoMle:
      return "JO-MLE";
    case Method::JoMap:
      return "JO-MAP";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '_') c = '-';
    key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (key == "WMLE") return Method::Wmle;
  if (key == "JO-MLE" || key == "JOMLE") return Method::JoMle;
  if (key == "JO-MAP" || key == "JOMAP") return Method::JoMap;
  throw Error("invalid_argument", "unknown method '" + std::string(name) + "'");
}

PhaseStats sufficient_stats(PhaseId phase_id, std::span<const ArrivalObservation> weighted,
                            int lane_count) {
  PhaseStats s;
  s.phase_id = phase_id;
  s.lane_count = lane_count;
  s.observation_count = static_cast<int>(weighted.size());
  double exposure = 0.0;
  for (const auto& obs : weighted) {
    s.weighted_count += obs.norm_weight * obs.vehicles_ahead;
    exposure += obs.norm_weight * obs.raw_weight;
  }
  s.weighted_exposure = exposure / lane_count;
  return s;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
/// Lower end of the lambda0 box; the support itself is open at zero.
constexpr double kLambdaFloorFraction = 1e-9;

void check_alignment(std::span<const PhaseStats> stats, const PriorSpec& prior,
                     std::span<const double> cycle_lengths) {
  if (stats.size() != prior.phases.size() ||
      (!cycle_lengths.empty() && cycle_lengths.size() != stats.size())) {
    throw Error("invalid_argument", "stats, prior and cycle lengths differ in phase count");
  }
  for (std::size_t z = 0; z < stats.size(); ++z) {
    if (stats[z].phase_id != prior.phases[z].phase_id) {
      throw Error("invalid_argument", "stats and prior phase order differ");
    }
  }
}

bool any_observed(std::span<const PhaseStats> stats) {
  return std::any_of(stats.begin(), stats.end(),
                     [](const PhaseStats& s) { return s.observation_count > 0; });
}

JointEstimate failed_joint(Method method, std::span<const PhaseStats> stats, int cycle_index) {
  JointEstimate out;
  for (const auto& s : stats) {
    DemandEstimate d;
    d.method = method;
    d.phase_id = s.phase_id;
    d.cycle_index = cycle_index;
    d.status = EstimateStatus::Failed;
    out.demands.push_back(d);
  }
  return out;
}

void fill_demands(JointEstimate& out, Method method, std::span<const PhaseStats> stats,
                  std::span<const double> cycle_lengths, int cycle_index) {
  out.demands.clear();
  for (std::size_t z = 0; z < stats.size(); ++z) {
    DemandEstimate d;
    d.method = method;
    d.phase_id = stats[z].phase_id;
    d.cycle_index = cycle_index;
    d.status = EstimateStatus::Ok;
    d.lambda0 = out.theta.lambda0;
    d.alpha = out.theta.shares[z];
    d.demand_veh = out.theta.lambda0 * out.theta.shares[z] * cycle_lengths[z];
    d.lane_rate_vps = out.theta.lambda0 * out.theta.shares[z] / stats[z].lane_count;
    d.iterations = out.theta.iterations;
    out.demands.push_back(d);
  }
}

}  // namespace

double log_posterior(double lambda0, std::span<const double> shares,
                     std::span<const PhaseStats> stats, const PriorSpec& prior) {
  check_alignment(stats, prior, {});
  if (shares.size() != stats.size()) throw Error("invalid_argument", "share count mismatch");
  if (!(lambda0 > 0.0) || lambda0 > prior.lambda0_upper) return kNegInf;

  double value = 0.0;
  for (std::size_t z = 0; z < stats.size(); ++z) {
    const double a = shares[z];
    const auto& p = prior.phases[z];
    const auto& s = stats[z];
    if (a < 0.0) return kNegInf;
    value -= (a - p.mean_share) * (a - p.mean_share) / (2.0 * p.variance);
    if (s.weighted_count > 0.0) {
      if (a == 0.0) return kNegInf;
      value += s.weighted_count * std::log(a * lambda0);
    }
    value -= a * lambda0 * s.weighted_exposure;
  }
  return value;
}

PosteriorGradient posterior_gradient(double lambda0, std::span<const double> shares,
                                     std::span<const PhaseStats> stats, const PriorSpec& prior) {
  check_alignment(stats, prior, {});
  PosteriorGradient g;
  g.d_shares.resize(stats.size());
  double total_count = 0.0;
  double exposure = 0.0;
  for (std::size_t z = 0; z < stats.size(); ++z) {
    const auto& p = prior.phases[z];
    const auto& s = stats[z];
    const double a = shares[z];
    total_count += s.weighted_count;
    exposure += s.weighted_exposure * a;
    g.d_shares[z] = -(a - p.mean_share) / p.variance + s.weighted_count / a -
                    lambda0 * s.weighted_exposure;
  }
  g.d_lambda0 = total_count / lambda0 - exposure;
  return g;
}

DemandEstimate wmle(PhaseId phase_id, int cycle_index, std::span<const ArrivalObservation> weighted,
                    int lane_count, double cycle_length_s) {
  DemandEstimate d;
  d.method = Method::Wmle;
  d.phase_id = phase_id;
  d.cycle_index = cycle_index;
  if (weighted.empty()) return d;

  double count = 0.0;
  double exposure = 0.0;
  for (const auto& obs : weighted) {
    count += obs.norm_weight * obs.vehicles_ahead;
    exposure += obs.norm_weight * obs.raw_weight;
  }
  if (!(exposure > 0.0)) return d;
  d.status = EstimateStatus::Ok;
  d.lane_rate_vps = count / exposure;
  d.demand_veh = lane_count * d.lane_rate_vps * cycle_length_s;
  return d;
}

JointEstimate jomle(std::span<const PhaseStats> stats, const PriorSpec& prior,
                    std::span<const double> cycle_lengths_s, int cycle_index) {
  check_alignment(stats, prior, cycle_lengths_s);
  if (!any_observed(stats)) return failed_joint(Method::JoMle, stats, cycle_index);

  double count = 0.0;
  double exposure = 0.0;
  for (std::size_t z = 0; z < stats.size(); ++z) {
    count += stats[z].weighted_count;
    exposure += stats[z].weighted_exposure * prior.phases[z].mean_share;
  }
  if (!(exposure > 0.0)) return failed_joint(Method::JoMle, stats, cycle_index);

  const double floor = kLambdaFloorFraction * prior.lambda0_upper;
  JointEstimate out;
  out.ok = true;
  const double raw = count / exposure;
  out.theta.lambda0 = std::clamp(raw, floor, prior.lambda0_upper);
  out.theta.at_boundary = out.theta.lambda0 != raw;
  out.theta.converged = true;
  for (const auto& p : prior.phases) out.theta.shares.push_back(p.mean_share);
  fill_demands(out, Method::JoMle, stats, cycle_lengths_s, cycle_index);
  return out;
}

double alpha_positive_root(double lambda0, double delta, double mu, double sigma2,
                           double weighted_count, double weighted_exposure) {
  const double a = mu / sigma2 - lambda0 * weighted_exposure - delta;
  const double r = std::sqrt(a * a + 4.0 * weighted_count / sigma2);
  // Rationalized form avoids cancellation when a is large and negative.
  if (a >= 0.0) return 0.5 * sigma2 * (a + r);
  const double denom = r - a;
  return denom > 0.0 ? 2.0 * weighted_count / denom : 0.0;
}

namespace {

/// The reduced stationarity system in (lambda0, delta).
class ReducedSystem {
 public:
  ReducedSystem(std::span<const PhaseStats> stats, const PriorSpec& prior)
      : stats_(stats), prior_(prior) {
    for (const auto& s : stats) total_count_ += s.weighted_count;
  }

  double total_count() const { return total_count_; }

  double alpha(std::size_t z, double lambda0, double delta) const {
    const auto& p = prior_.phases[z];
    return alpha_positive_root(lambda0, delta, p.mean_share, p.variance, stats_[z].weighted_count,
                               stats_[z].weighted_exposure);
  }

  /// d alpha / d a, where a = mu/s2 - lambda0 W - delta.
  double alpha_slope(std::size_t z, double lambda0, double delta, double alpha) const {
    const auto& p = prior_.phases[z];
    const double a = p.mean_share / p.variance - lambda0 * stats_[z].weighted_exposure - delta;
    const double r = std::sqrt(a * a + 4.0 * stats_[z].weighted_count / p.variance);
    if (r > 0.0) return alpha / r;
    return 0.5 * p.variance;
  }

  std::array<double, 2> residual(double lambda0, double delta) const {
    double exposure = 0.0;
    double sum = 0.0;
    for (std::size_t z = 0; z < stats_.size(); ++z) {
      const double a = alpha(z, lambda0, delta);
      exposure += stats_[z].weighted_exposure * a;
      sum += a;
    }
    return {total_count_ - lambda0 * exposure, sum - 1.0};
  }

  /// Row-major 2x2 Jacobian of residual().
  std::array<double, 4> jacobian(double lambda0, double delta) const {
    double exposure = 0.0;
    double exposure_sq_slope = 0.0;
    double exposure_slope = 0.0;
    double slope_sum = 0.0;
    for (std::size_t z = 0; z < stats_.size(); ++z) {
      const double w = stats_[z].weighted_exposure;
      const double a = alpha(z, lambda0, delta);
      const double slope = alpha_slope(z, lambda0, delta, a);
      exposure += w * a;
      exposure_sq_slope += w * w * slope;
      exposure_slope += w * slope;
      slope_sum += slope;
    }
    return {-exposure + lambda0 * exposure_sq_slope, lambda0 * exposure_slope, -exposure_slope,
            -slope_sum};
  }

  /// Multiplier making the shares sum to one at fixed lambda0. The share sum
  /// is strictly decreasing in delta, so a bracketed Newton/bisection works.
  double solve_multiplier(double lambda0, double guess) const {
    auto f = [&](double d) { return residual(lambda0, d)[1]; };
    double lo = guess;
    double hi = guess;
    double step = 1.0;
    while (f(lo) <= 0.0 && step < 1e300) {
      lo -= step;
      step *= 2.0;
    }
    step = 1.0;
    while (f(hi) >= 0.0 && step < 1e300) {
      hi += step;
      step *= 2.0;
    }
    double d = std::clamp(guess, lo, hi);
    for (int i = 0; i < 200; ++i) {
      const double fd = f(d);
      if (std::abs(fd) < 1e-15) break;
      if (fd > 0.0) {
        lo = d;
      } else {
        hi = d;
      }
      const double deriv = jacobian(lambda0, d)[3];
      double next = deriv < 0.0 ? d - fd / deriv : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (next == d || hi - lo <= 1e-15 * std::max(1.0, std::abs(d))) {
        d = next;
        break;
      }
      d = next;
    }
    return d;
  }

 private:
  std::span<const PhaseStats> stats_;
  const PriorSpec& prior_;
  double total_count_ = 0.0;
};

double inf_norm(const std::array<double, 2>& r) { return std::max(std::abs(r[0]), std::abs(r[1])); }

struct SolveState {
  double lambda0 = 0.0;
  double delta = 0.0;
  int iterations = 0;
  bool converged = false;
  bool at_boundary = false;
};

/// Damped Newton on the reduced system with lambda0 projected into the box.
SolveState newton_solve(const ReducedSystem& sys, double floor, double upper, double lambda_init,
                        double delta_init, const SolverConfig& cfg) {
  SolveState st{lambda_init, delta_init};
  auto res = sys.residual(st.lambda0, st.delta);
  double norm = inf_norm(res);

  for (; st.iterations < cfg.max_iterations; ++st.iterations) {
    if (norm < cfg.tolerance) {
      st.converged = true;
      return st;
    }
    // Pinned at the upper end with the gradient still pushing outwards.
    if (st.lambda0 >= upper && res[0] > 0.0 && std::abs(res[1]) < cfg.tolerance) {
      st.converged = true;
      st.at_boundary = true;
      return st;
    }
    const auto jac = sys.jacobian(st.lambda0, st.delta);
    const double det = jac[0] * jac[3] - jac[1] * jac[2];
    if (!std::isfinite(det) || det == 0.0) break;
    const double step_lambda = -(jac[3] * res[0] - jac[1] * res[1]) / det;
    const double step_delta = -(-jac[2] * res[0] + jac[0] * res[1]) / det;

    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
      double lambda = st.lambda0 + t * step_lambda;
      double delta = st.delta + t * step_delta;
      if (!(lambda > 0.0)) continue;
      if (lambda > upper) {
        lambda = upper;
        delta = sys.solve_multiplier(lambda, delta);
      }
      lambda = std::max(lambda, floor);
      const auto trial = sys.residual(lambda, delta);
      const double trial_norm = inf_norm(trial);
      if (trial_norm < norm) {
        st.lambda0 = lambda;
        st.delta = delta;
        res = trial;
        norm = trial_norm;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Projection can stall at the boundary; settle the multiplier and
      // check the boundary optimality condition.
      if (st.lambda0 + step_lambda > upper) {
        st.lambda0 = upper;
        st.delta = sys.solve_multiplier(upper, st.delta);
        res = sys.residual(st.lambda0, st.delta);
        norm = inf_norm(res);
        if (res[0] > 0.0) {
          st.converged = true;
          st.at_boundary = true;
          ++st.iterations;
        }
      }
      return st;
    }
  }
  if (norm < cfg.tolerance) st.converged = true;
  return st;
}

/// Bisection on the profile residual sum N - lambda0 sum W alpha(lambda0),
/// with the multiplier solved exactly at every lambda0.
SolveState profile_solve(const ReducedSystem& sys, double floor, double upper, double delta_init,
                         const SolverConfig& cfg) {
  SolveState st;
  double delta = delta_init;
  auto profile = [&](double lambda) {
    delta = sys.solve_multiplier(lambda, delta);
    return sys.residual(lambda, delta)[0];
  };
  if (profile(upper) >= 0.0) {
    st = {upper, delta, 1, true, true};
    return st;
  }
  double lo = floor;
  double hi = upper;
  if (profile(lo) <= 0.0) {
    st = {floor, delta, 1, true, true};
    return st;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double value = profile(mid);
    st.iterations = i + 1;
    if (std::abs(value) < cfg.tolerance) {
      st.lambda0 = mid;
      st.delta = delta;
      st.converged = true;
      return st;
    }
    if (value > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return st;
}

}  // namespace

JointEstimate jomap(std::span<const PhaseStats> stats, const PriorSpec& prior,
                    std::span<const double> cycle_lengths_s, int cycle_index,
                    const SolverConfig& cfg) {
  check_alignment(stats, prior, cycle_lengths_s);
  if (!any_observed(stats)) return failed_joint(Method::JoMap, stats, cycle_index);

  const ReducedSystem sys(stats, prior);
  const double upper = prior.lambda0_upper;
  const double floor = kLambdaFloorFraction * upper;

  const double lambda_init = 0.5 * upper;
  double delta_init = 0.0;
  int active = 0;
  for (std::size_t z = 0; z < stats.size(); ++z) {
    if (stats[z].observation_count == 0) continue;
    const double mu = std::max(prior.phases[z].mean_share, 1e-12);
    delta_init += stats[z].weighted_count / mu - lambda_init * stats[z].weighted_exposure;
    ++active;
  }
  delta_init /= active;

  SolveState st;
  if (sys.total_count() > 0.0) {
    st = newton_solve(sys, floor, upper, lambda_init, delta_init, cfg);
    if (!st.converged) {
      const int spent = st.iterations;
      st = profile_solve(sys, floor, upper, delta_init, cfg);
      st.iterations += spent;
    }
  } else {
    // Every observation sits inside the initial queue: the likelihood only
    // pulls lambda0 towards zero.
    st = {floor, sys.solve_multiplier(floor, delta_init), 0, true, true};
  }

  if (!st.converged) {
    JointEstimate fallback = jomle(stats, prior, cycle_lengths_s, cycle_index);
    fallback.theta.converged = false;
    fallback.theta.iterations = st.iterations;
    for (auto& d : fallback.demands) {
      d.method = Method::JoMap;
      d.iterations = st.iterations;
    }
    return fallback;
  }

  // One polishing step of the multiplier, then exact renormalization.
  if (!st.at_boundary) {
    const auto jac = sys.jacobian(st.lambda0, st.delta);
    const auto res = sys.residual(st.lambda0, st.delta);
    const double det = jac[0] * jac[3] - jac[1] * jac[2];
    if (std::isfinite(det) && det != 0.0) {
      const double lambda = st.lambda0 - (jac[3] * res[0] - jac[1] * res[1]) / det;
      const double delta = st.delta - (-jac[2] * res[0] + jac[0] * res[1]) / det;
      if (lambda > floor && lambda <= upper &&
          inf_norm(sys.residual(lambda, delta)) < inf_norm(res)) {
        st.lambda0 = lambda;
        st.delta = delta;
      }
    }
  }

  JointEstimate out;
  out.ok = true;
  out.theta.lambda0 = st.lambda0;
  out.theta.multiplier = st.delta;
  out.theta.converged = true;
  out.theta.at_boundary = st.at_boundary;
  out.theta.iterations = st.iterations;
  out.theta.residual_norm = inf_norm(sys.residual(st.lambda0, st.delta));
  double sum = 0.0;
  for (std::size_t z = 0; z < stats.size(); ++z) {
    out.theta.shares.push_back(sys.alpha(z, st.lambda0, st.delta));
    sum += out.theta.shares.back();
  }
  for (auto& a : out.theta.shares) a /= sum;
  fill_demands(out, Method::JoMap, stats, cycle_lengths_s, cycle_index);
  return out;
}

}  // namespace sigdemand
