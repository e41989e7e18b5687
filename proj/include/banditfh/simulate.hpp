#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "banditfh/action_table.hpp"
#include "banditfh/designs.hpp"
#include "banditfh/evaluator.hpp"

namespace banditfh {

/// Identifier of the pseudo-random scheme, recorded in simulation output:
/// one mt19937_64 per replicate, seeded by splitmix64 of (seed, replicate);
/// uniforms take the top 53 bits; Bayesian theta draws invert the
/// regularized incomplete beta function.
inline constexpr const char* kRngId = "mt19937_64+splitmix64/u53+betainv";

struct SimConfig {
  DesignSpec design{};
  Scenario scenario{};
  std::uint32_t horizon = 1;
  std::uint64_t runs = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  const ActionTable* table = nullptr;  // required for DP designs
};

struct SimResult {
  double mean_successes = 0.0;
  double sd_successes = 0.0;
  double standard_error = 0.0;
  std::uint64_t runs = 0;
  std::string rng = kRngId;
};

/// Monte Carlo replay of the design.  Mixed actions and Bayesian theta draws
/// are sampled; replicates are independent and seeded per replicate, so the
/// result does not depend on the worker count.
SimResult simulate(const SimConfig& config);

/// Exhaustive expansion of every (action, outcome) branch for small
/// horizons (T <= 12); returns the exact terminal distribution keyed by
/// (s_C, f_C, s_D, f_D).  Shares no lattice indexing with the exact
/// evaluator, by intent.
std::map<std::array<std::uint32_t, 4>, double> enumerate_paths(const DesignSpec& design,
                                                               const Scenario& scenario,
                                                               std::uint32_t horizon,
                                                               const ActionTable* table = nullptr);

}  // namespace banditfh
