#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "banditfh/action_table.hpp"
#include "banditfh/beta.hpp"
#include "banditfh/designs.hpp"
#include "banditfh/memory.hpp"
#include "banditfh/states.hpp"

namespace banditfh {

/// What drives the transitions during evaluation: fixed true success
/// probabilities (frequentist) or the Beta predictive law (Bayesian).  The
/// prior always drives the design's own decisions.
struct Scenario {
  enum class Mode : std::uint8_t { frequentist, bayesian };

  Mode mode = Mode::bayesian;
  double theta_c = 0.0;
  double theta_d = 0.0;
  PriorSpec prior{};

  static Scenario frequentist(double theta_c, double theta_d, const PriorSpec& prior = {}) {
    return {Mode::frequentist, theta_c, theta_d, prior};
  }
  static Scenario bayesian(const PriorSpec& prior = {}) {
    return {Mode::bayesian, 0.0, 0.0, prior};
  }

  void validate() const;
};

/// Exact mean and standard deviation of the number of successes for one
/// (design, scenario, horizon), plus the derived proportion and regret.
struct EvalResult {
  std::uint32_t horizon = 0;
  double mean_successes = 0.0;
  double sd_successes = 0.0;
  double mean_proportion = 0.0;
  double sd_proportion = 0.0;
  double benchmark = 0.0;  // T max(theta) or T E[max theta]
  double mean_regret = 0.0;
  double sd_regret = 0.0;
  double max_mass_drift = 0.0;  // diagnostics: worst |sum P - 1| over layers
};

struct EvalOptions {
  int threads = 1;
  MemoryBudget* budget = nullptr;
};

/// Fills the design's action code for every state of one layer, in rank
/// order.  Providers are called with ascending or descending t by the sweeps.
using CodeProvider = std::function<void(std::uint32_t t, std::span<Action> codes)>;

/// Provider backed by a design rule (and an action table for DP designs).
/// Validates table horizon/prior against the request.
CodeProvider design_code_provider(const DesignSpec& design, const PriorSpec& prior,
                                  std::uint32_t horizon, TableSource* table = nullptr,
                                  int threads = 1);

/// Propagates the state distribution forward and reads the mean/SD off the
/// terminal layer.  Throws IntegrityError if probability mass drifts by more
/// than 1e-10 in any layer.
EvalResult forward_eval_with(const CodeProvider& codes, const Scenario& scenario,
                             std::uint32_t horizon, const EvalOptions& opts = {});
EvalResult forward_eval(const DesignSpec& design, const Scenario& scenario, std::uint32_t horizon,
                        const EvalOptions& opts = {}, TableSource* table = nullptr);

/// Terminal distribution of the forward sweep, indexed by layer-T rank.
std::vector<double> forward_terminal(const CodeProvider& codes, const Scenario& scenario,
                                     std::uint32_t horizon, const EvalOptions& opts = {});

/// Backward fixed-design evaluation with the per-step reward form; returns
/// the root mean number of successes.
double backward_mean_classic_with(const CodeProvider& codes, const Scenario& scenario,
                                  std::uint32_t horizon, const EvalOptions& opts = {});
double backward_mean_classic(const DesignSpec& design, const Scenario& scenario,
                             std::uint32_t horizon, const EvalOptions& opts = {},
                             TableSource* table = nullptr);

/// Backward evaluation with the terminal reward form (terminal value is the
/// number of observed successes); agrees with the classic form.
double backward_mean_terminal_with(const CodeProvider& codes, const Scenario& scenario,
                                   std::uint32_t horizon, const EvalOptions& opts = {});
double backward_mean_terminal(const DesignSpec& design, const Scenario& scenario,
                              std::uint32_t horizon, const EvalOptions& opts = {},
                              TableSource* table = nullptr);

/// (mean regret, benchmark) for a mean number of successes under a scenario.
std::pair<double, double> regret_of(double mean_successes, const Scenario& scenario,
                                    std::uint32_t horizon);

// CSV surface.  Header is fixed; numeric fields are printed with 17
// significant digits; theta fields are empty in bayes mode.
inline constexpr std::string_view kCsvHeader =
    "design,T,mode,theta_C,theta_D,prior,mean_successes,sd_successes,mean_proportion,"
    "sd_proportion,mean_regret,sd_regret";

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, std::string_view design_name, const Scenario& scenario,
                   const EvalResult& result);

struct SweepOptions {
  int threads = 1;
  MemoryBudget* budget = nullptr;
  std::filesystem::path scratch_dir;  // for spilled DP tables; temp dir when empty
};

/// Evaluates every (design, scenario, horizon) cell and writes CSV rows in
/// (design, scenario, horizon) order.  DP tables are solved once per
/// (horizon, prior), in memory when they fit the budget and spilled to a
/// scratch file otherwise.  A failing cell aborts with its coordinates.
void table_sweep(std::span<const DesignSpec> designs, std::span<const Scenario> scenarios,
                 std::span<const std::uint32_t> horizons, std::ostream& out,
                 const SweepOptions& opts = {});

}  // namespace banditfh
