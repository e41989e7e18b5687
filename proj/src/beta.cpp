#include "banditfh/beta.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace banditfh {

void PriorSpec::validate() const {
  for (double v : {s_c0, f_c0, s_d0, f_d0}) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::domain_error("prior pseudo-counts must be finite and nonnegative");
  }
}

ArmPosteriors posterior(const PriorSpec& prior, const PhysicalState& x) {
  return {{prior.s_c0 + x.s_c, prior.f_c0 + x.f_c}, {prior.s_d0 + x.s_d, prior.f_d0 + x.f_d}};
}

double predictive_success(const PosteriorCounts& counts) {
  const double n = counts.s + counts.f;
  if (n <= 0.0) throw std::domain_error("predictive probability undefined: no pseudo-counts");
  return counts.s / n;
}

double predictive_failure(const PosteriorCounts& counts) {
  const double n = counts.s + counts.f;
  if (n <= 0.0) throw std::domain_error("predictive probability undefined: no pseudo-counts");
  return counts.f / n;
}

std::pair<double, double> beta_params_from_moments(double mean, double var) {
  if (!std::isfinite(mean) || !std::isfinite(var))
    throw std::domain_error("moments must be finite");
  if (mean == 0.0 || mean == 1.0)
    throw std::domain_error("parameters cannot be uniquely determined for mean 0 or 1");
  if (mean < 0.0 || mean > 1.0) throw std::domain_error("mean must lie in [0, 1]");
  if (mean == 0.5 && var == 0.25) return {0.0, 0.0};  // symmetric two-point distribution
  if (var <= 0.0 || var >= mean * (1.0 - mean))
    throw std::domain_error("infeasible moments: variance must satisfy 0 < var < mean*(1-mean)");
  const double k = mean * (1.0 - mean) / var - 1.0;
  return {mean * k, (1.0 - mean) * k};
}

BetaMoments moments_from_beta(double s, double f) {
  if (!std::isfinite(s) || !std::isfinite(f) || s < 0.0 || f < 0.0)
    throw std::domain_error("Beta parameters must be finite and nonnegative");
  if (s == 0.0 && f == 0.0) return {0.5, 0.25};
  if (s == 0.0) return {0.0, 0.0};
  if (f == 0.0) return {1.0, 0.0};
  const double mean = s / (s + f);
  return {mean, mean * (1.0 - mean) / (s + f + 1.0)};
}

double expected_max(const PosteriorCounts& arm_c, const PosteriorCounts& arm_d) {
  if (arm_c.s <= 0.0 || arm_c.f <= 0.0 || arm_d.s <= 0.0 || arm_d.f <= 0.0)
    throw std::domain_error("expected_max requires strictly positive Beta parameters");
  // E[max] = integral of 1 - F_C(u) F_D(u) over [0,1].
  auto integrand = [&](double u) {
    return 1.0 - boost::math::ibeta(arm_c.s, arm_c.f, u) * boost::math::ibeta(arm_d.s, arm_d.f, u);
  };
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(integrand, 0.0, 1.0, 1e-12);
}

}  // namespace banditfh
