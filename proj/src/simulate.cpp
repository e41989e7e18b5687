#include "banditfh/simulate.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "banditfh/errors.hpp"
#include "banditfh/parallel.hpp"

namespace banditfh {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double uniform53(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

double draw_theta(double s, double f, double u) {
  if (s == 0.0) return 0.0;  // degenerate Beta: point mass
  if (f == 0.0) return 1.0;
  return boost::math::ibeta_inv(s, f, u);
}

struct ReplicateSums {
  double successes = 0.0;
  double successes_sq = 0.0;
};

ReplicateSums run_replicates(const SimConfig& cfg, std::uint64_t begin, std::uint64_t end) {
  const bool bayes = cfg.scenario.mode == Scenario::Mode::bayesian;
  const PriorSpec& prior = cfg.scenario.prior;
  ReplicateSums sums;
  for (std::uint64_t i = begin; i < end; ++i) {
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(i)));
    double theta_c = cfg.scenario.theta_c;
    double theta_d = cfg.scenario.theta_d;
    if (bayes) {
      theta_c = draw_theta(prior.s_c0, prior.f_c0, uniform53(rng));
      theta_d = draw_theta(prior.s_d0, prior.f_d0, uniform53(rng));
    }
    PhysicalState x;
    std::uint32_t successes = 0;
    for (std::uint32_t t = 0; t < cfg.horizon; ++t) {
      const ActionProb ap =
          to_prob(action_of(cfg.design, prior, x, t, cfg.horizon, cfg.table));
      const bool arm_c = uniform53(rng) < ap.p_c;
      const bool success = uniform53(rng) < (arm_c ? theta_c : theta_d);
      if (arm_c) {
        success ? ++x.s_c : ++x.f_c;
      } else {
        success ? ++x.s_d : ++x.f_d;
      }
      successes += success ? 1u : 0u;
    }
    sums.successes += double(successes);
    sums.successes_sq += double(successes) * double(successes);
  }
  return sums;
}

}  // namespace

SimResult simulate(const SimConfig& cfg) {
  cfg.scenario.validate();
  if (cfg.runs < 1) throw std::domain_error("simulation needs at least one run");
  if (cfg.horizon < 1) throw std::domain_error("horizon must be at least 1");
  if (cfg.threads < 1) throw std::invalid_argument("thread count must be >= 1");
  if (cfg.design.needs_table()) {
    if (cfg.table == nullptr) throw ConfigError("dp design requires a solved action table");
    if (cfg.table->horizon() != cfg.horizon || !(cfg.table->prior() == cfg.scenario.prior))
      throw ConfigError("action table does not match the simulation request");
  }

  const std::uint64_t pieces =
      std::min<std::uint64_t>(cfg.runs, std::uint64_t(cfg.threads) * 8);
  std::vector<ReplicateSums> partial(pieces);
  parallel_pieces(static_cast<std::size_t>(pieces), cfg.threads, [&](std::size_t p) {
    const std::uint64_t begin = cfg.runs * p / pieces;
    const std::uint64_t end = cfg.runs * (p + 1) / pieces;
    partial[p] = run_replicates(cfg, begin, end);
  });
  // Success counts are integers, so these sums are exact and reassociate
  // freely: the result is identical for any worker count.
  double sum = 0.0, sum_sq = 0.0;
  for (const ReplicateSums& s : partial) {
    sum += s.successes;
    sum_sq += s.successes_sq;
  }

  SimResult result;
  result.runs = cfg.runs;
  const double n = double(cfg.runs);
  result.mean_successes = sum / n;
  const double centered = std::max(0.0, sum_sq - n * result.mean_successes * result.mean_successes);
  result.sd_successes = cfg.runs > 1 ? std::sqrt(centered / (n - 1.0)) : 0.0;
  result.standard_error = result.sd_successes / std::sqrt(n);
  return result;
}

namespace {

void expand_paths(const DesignSpec& design, const Scenario& sc, std::uint32_t horizon,
                  const ActionTable* table, const PhysicalState& x, std::uint32_t t, double prob,
                  std::map<std::array<std::uint32_t, 4>, double>& dist) {
  if (t == horizon) {
    dist[{x.s_c, x.f_c, x.s_d, x.f_d}] += prob;
    return;
  }
  const ActionProb ap = to_prob(action_of(design, sc.prior, x, t, horizon, table));
  const bool bayes = sc.mode == Scenario::Mode::bayesian;
  if (ap.p_c > 0.0) {
    // Posterior success probability re-derived arithmetically per path.
    const double q = bayes ? (sc.prior.s_c0 + x.s_c) /
                                 (sc.prior.s_c0 + sc.prior.f_c0 + x.s_c + x.f_c)
                           : sc.theta_c;
    expand_paths(design, sc, horizon, table, {x.s_c + 1, x.f_c, x.s_d, x.f_d}, t + 1,
                 prob * ap.p_c * q, dist);
    expand_paths(design, sc, horizon, table, {x.s_c, x.f_c + 1, x.s_d, x.f_d}, t + 1,
                 prob * ap.p_c * (1.0 - q), dist);
  }
  if (ap.p_d > 0.0) {
    const double q = bayes ? (sc.prior.s_d0 + x.s_d) /
                                 (sc.prior.s_d0 + sc.prior.f_d0 + x.s_d + x.f_d)
                           : sc.theta_d;
    expand_paths(design, sc, horizon, table, {x.s_c, x.f_c, x.s_d + 1, x.f_d}, t + 1,
                 prob * ap.p_d * q, dist);
    expand_paths(design, sc, horizon, table, {x.s_c, x.f_c, x.s_d, x.f_d + 1}, t + 1,
                 prob * ap.p_d * (1.0 - q), dist);
  }
}

}  // namespace

std::map<std::array<std::uint32_t, 4>, double> enumerate_paths(const DesignSpec& design,
                                                               const Scenario& scenario,
                                                               std::uint32_t horizon,
                                                               const ActionTable* table) {
  scenario.validate();
  if (horizon < 1) throw std::domain_error("horizon must be at least 1");
  if (horizon > 12)
    throw std::domain_error("path enumeration is limited to horizons of at most 12");
  std::map<std::array<std::uint32_t, 4>, double> dist;
  expand_paths(design, scenario, horizon, table, {}, 0, 1.0, dist);
  return dist;
}

}  // namespace banditfh
