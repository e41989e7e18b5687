#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "banditfh/action_table.hpp"
#include "banditfh/beta.hpp"
#include "banditfh/designs.hpp"
#include "banditfh/memory.hpp"
#include "banditfh/states.hpp"

namespace banditfh {

/// Absolute tie tolerance used when recording optimal actions: values at
/// epoch t are O(T - t) and carry rounding of that order.
inline double tie_tolerance(std::uint32_t remaining_steps) {
  return 1e-9 * double(remaining_steps);
}

struct SolveOptions {
  int threads = 1;
  MemoryBudget* budget = nullptr;  // run against a local default budget when null
};

struct SolveResult {
  double bayes_successes = 0.0;  // V_0 at the root state
  double root_value_c = 0.0;
  double root_value_d = 0.0;
  Action root_action = Action::none;
  std::uint64_t peak_value_bytes = 0;  // resident value storage, two layers
  double wall_seconds = 0.0;
  std::optional<ActionTable> table;
};

/// Backward recursion over the full lattice; values only.
SolveResult solve(const PriorSpec& prior, std::uint32_t horizon, const SolveOptions& opts = {});

/// As solve(), and additionally records the optimal action of every state in
/// an in-memory table.
SolveResult solve_with_table(const PriorSpec& prior, std::uint32_t horizon,
                             const SolveOptions& opts = {});

/// As solve(), streaming the packed action codes into a BFH1 file instead of
/// holding them in memory.
SolveResult solve_to_file(const PriorSpec& prior, std::uint32_t horizon,
                          const std::filesystem::path& path, const SolveOptions& opts = {});

/// Online mode: backward recursion over the sub-lattice rooted at x, storing
/// only two value layers, returning the root's optimal (or mixed) action.
Action optimal_action(const PriorSpec& prior, const PhysicalState& x, std::uint32_t t,
                      std::uint32_t horizon, const SolveOptions& opts = {});

}  // namespace banditfh
