#pragma once

#include <utility>

#include "banditfh/states.hpp"

namespace banditfh {

/// Independent Beta priors for the two arms, given as pseudo-counts of
/// successes and failures.  Values are reals so that Jeffreys and
/// moment-derived priors are representable.
struct PriorSpec {
  double s_c0 = 1.0;
  double f_c0 = 1.0;
  double s_d0 = 1.0;
  double f_d0 = 1.0;

  /// Throws std::domain_error unless all four values are finite and >= 0.
  void validate() const;

  /// True when some arm has s0 + f0 == 0 (Haldane): its predictive success
  /// probability is undefined before the first observation.  Such priors are
  /// representable for moment conversions but rejected by solvers/evaluators.
  bool haldane_arm() const { return s_c0 + f_c0 == 0.0 || s_d0 + f_d0 == 0.0; }

  bool arm_symmetric() const { return s_c0 == s_d0 && f_c0 == f_d0; }

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

/// Posterior pseudo-counts of one arm: prior pseudo-counts plus observations.
struct PosteriorCounts {
  double s = 0.0;
  double f = 0.0;

  friend bool operator==(const PosteriorCounts&, const PosteriorCounts&) = default;
};

struct ArmPosteriors {
  PosteriorCounts c;
  PosteriorCounts d;
};

ArmPosteriors posterior(const PriorSpec& prior, const PhysicalState& x);

/// Predictive success probability s~ / (s~ + f~).  Throws std::domain_error
/// when the counts sum to zero (Haldane before data).
double predictive_success(const PosteriorCounts& counts);

/// Complement, computed as f~ / (s~ + f~) rather than 1 - predictive_success.
double predictive_failure(const PosteriorCounts& counts);

struct BetaMoments {
  double mean = 0.0;
  double var = 0.0;
};

/// Beta parameters with the given mean and variance.  Requires
/// 0 < mean < 1 and 0 < var < mean (1 - mean), plus the one lawful boundary
/// case (1/2, 1/4) -> (0, 0).  Mean 0 or 1 cannot determine the parameters
/// uniquely; infeasible variances are rejected.
std::pair<double, double> beta_params_from_moments(double mean, double var);

/// Mean and variance of Beta(s, f), with the degenerate branches
/// (0,f) -> (0,0), (s,0) -> (1,0), (0,0) -> (1/2, 1/4).
BetaMoments moments_from_beta(double s, double f);

/// E[max{theta_C, theta_D}] for independent Beta arms, via adaptive
/// quadrature of the survival product to absolute tolerance 1e-10.
double expected_max(const PosteriorCounts& arm_c, const PosteriorCounts& arm_d);

}  // namespace banditfh
