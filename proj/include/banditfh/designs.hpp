#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "banditfh/beta.hpp"
#include "banditfh/states.hpp"

namespace banditfh {

class ActionTable;

/// Action codes as stored in solved tables: 0 is reserved for the terminal
/// layer, where no action exists.
enum class Action : std::uint8_t { none = 0, pure_c = 1, pure_d = 2, mixed = 3 };

/// A randomized allocation (p_C, p_D) with p_C + p_D = 1.
struct ActionProb {
  double p_c = 0.5;
  double p_d = 0.5;
  friend bool operator==(const ActionProb&, const ActionProb&) = default;
};

inline constexpr ActionProb kPureC{1.0, 0.0};
inline constexpr ActionProb kPureD{0.0, 1.0};
inline constexpr ActionProb kMixed{0.5, 0.5};

ActionProb to_prob(Action a);

enum class DesignKind : std::uint8_t {
  era,   // equal (1:1) randomized allocation
  dp,    // stored Bayes-optimal action table
  bm,    // Bayesian myopic
  fm,    // frequentist myopic ("play the favourite")
  ucb,   // upper confidence bound with coefficient alpha
  bkg,   // Bayesian knowledge gradient
  blff,  // Bayesian least failures first
  flff,  // frequentist least failures first
  bmsf,  // Bayesian most successes first
  bgdf,  // Bayesian greatest difference (successes - failures) first
  combo, // two-stage combination
};

/// A non-combo design stage.
struct StageSpec {
  DesignKind kind = DesignKind::era;
  double ucb_alpha = 0.0;
  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

/// A named allocation rule.  Combinations run `first` for the initial
/// N = round(sqrt(stage_coeff * T)) subjects and `second` afterwards; they
/// nest at most one level.
struct DesignSpec {
  DesignKind kind = DesignKind::era;
  double ucb_alpha = 0.0;
  StageSpec first{};
  StageSpec second{};
  double stage_coeff = 0.0;

  /// Parses names of the form: era, dp, bm, fm, ucb:<alpha>, bkg, blff, flff,
  /// bmsf, bgdf, combo:<first>+<second>:<coeff>.  Throws std::invalid_argument.
  static DesignSpec parse(std::string_view name);

  /// Canonical name, re-parseable by parse().
  std::string name() const;

  /// True when evaluating the design requires a solved action table.
  bool needs_table() const;

  friend bool operator==(const DesignSpec&, const DesignSpec&) = default;
};

// Individual rules.  Ties left over after a rule's own comparisons map to
// the equally-weighted mixed action, keeping exact evaluation deterministic.

Action era_action();
Action bm_action(const PriorSpec& prior, const PhysicalState& x);
Action fm_action(const PhysicalState& x, std::uint32_t t);

/// UCB score s/(s+f) + sqrt(alpha ln(t+1) / (s+f)); t counts subjects already
/// allocated.  Throws std::domain_error when the arm has no observations.
double ucb_index(double alpha, std::uint32_t s, std::uint32_t f, std::uint32_t t);
Action ucb_action(double alpha, const PhysicalState& x, std::uint32_t t);

/// Knowledge-gradient score of the arm with posterior `own` against `other`.
double bkg_score(const PosteriorCounts& own, const PosteriorCounts& other, std::uint32_t t,
                 std::uint32_t horizon);
Action bkg_action(const PriorSpec& prior, const PhysicalState& x, std::uint32_t t,
                  std::uint32_t horizon);

Action blff_action(const PriorSpec& prior, const PhysicalState& x);
Action flff_action(const PhysicalState& x);
Action bmsf_action(const PriorSpec& prior, const PhysicalState& x);
Action bgdf_action(const PriorSpec& prior, const PhysicalState& x);

/// First-stage length of a combination design: round-half-up of sqrt(c T).
std::uint32_t combo_stage_length(double stage_coeff, std::uint32_t horizon);

/// The stage a combination uses at epoch t (the design itself if not a combo).
StageSpec effective_stage(const DesignSpec& spec, std::uint32_t t, std::uint32_t horizon);

/// Uniform dispatcher.  DP designs require a table solved for the same
/// horizon and prior (ConfigError otherwise).
Action action_of(const DesignSpec& spec, const PriorSpec& prior, const PhysicalState& x,
                 std::uint32_t t, std::uint32_t horizon, const ActionTable* table = nullptr);

}  // namespace banditfh
