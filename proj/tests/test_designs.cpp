#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "banditfh/designs.hpp"
#include "banditfh/errors.hpp"
#include "banditfh/states.hpp"

using namespace banditfh;

namespace {

const PriorSpec kUniform{1, 1, 1, 1};

std::vector<PhysicalState> layer_states(std::uint32_t t) {
  std::vector<PhysicalState> states;
  for (std::uint32_t a = 0; a <= t; ++a)
    for (std::uint32_t b = 0; a + b <= t; ++b)
      for (std::uint32_t c = 0; a + b + c <= t; ++c) states.push_back({a, b, c, t - a - b - c});
  return states;
}

Action swapped(Action a) {
  if (a == Action::pure_c) return Action::pure_d;
  if (a == Action::pure_d) return Action::pure_c;
  return a;
}

}  // namespace

TEST_CASE("era is the mixed action everywhere") {
  CHECK(era_action() == Action::mixed);
  CHECK(to_prob(era_action()) == kMixed);
}

TEST_CASE("bayesian myopic compares posterior means") {
  CHECK(bm_action(kUniform, {0, 0, 0, 0}) == Action::mixed);
  // Posterior means 2/3 vs 1/2.
  CHECK(bm_action(kUniform, {1, 0, 0, 0}) == Action::pure_c);
  CHECK(bm_action(kUniform, {1, 0, 1, 0}) == Action::mixed);
}

TEST_CASE("frequentist myopic forces each arm once, then plays the favourite") {
  CHECK(fm_action({0, 0, 0, 0}, 0) == Action::pure_c);
  CHECK(fm_action({1, 0, 0, 0}, 1) == Action::pure_d);
  CHECK(fm_action({1, 0, 0, 1}, 2) == Action::pure_c);
  CHECK(fm_action({1, 0, 1, 0}, 2) == Action::mixed);
}

TEST_CASE("ucb index values") {
  // Hand evaluation of the index formula.
  CHECK(ucb_index(0.18, 1, 0, 2) ==
        doctest::Approx(1.0 + std::sqrt(0.18 * std::log(3.0))).epsilon(1e-15));
  CHECK(ucb_index(0.18, 1, 0, 2) == doctest::Approx(1.44471).epsilon(1e-5));
  CHECK(ucb_index(2.0, 0, 1, 2) ==
        doctest::Approx(std::sqrt(2.0 * std::log(3.0))).epsilon(1e-15));
  CHECK(ucb_index(2.0, 0, 1, 2) == doctest::Approx(1.48230).epsilon(1e-5));
  // Strictly increasing in t for fixed counts.
  for (std::uint32_t t = 2; t < 30; ++t)
    CHECK(ucb_index(1.0, 2, 3, t + 1) > ucb_index(1.0, 2, 3, t));
  CHECK_THROWS_AS(ucb_index(1.0, 0, 0, 5), std::domain_error);
}

TEST_CASE("ucb action: forced periods, then argmax") {
  CHECK(ucb_action(0.18, {0, 0, 0, 0}, 0) == Action::pure_c);
  CHECK(ucb_action(0.18, {1, 0, 0, 0}, 1) == Action::pure_d);
  for (double alpha : {0.18, 1.0, 2.0})
    CHECK(ucb_action(alpha, {1, 0, 0, 1}, 2) == Action::pure_c);
  CHECK(ucb_action(2.0, {1, 0, 1, 0}, 2) == Action::mixed);
}

TEST_CASE("knowledge-gradient score branches") {
  // Middle branch at the uniform root with two steps to go:
  // 1/2 + 2 [ (1/2)(1/2) + (1/2)(2/3) ] = 5/3.
  CHECK(bkg_score({1, 1}, {1, 1}, 0, 3) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  // Last period: the score collapses to the posterior mean.
  CHECK(bkg_score({3, 2}, {1, 4}, 9, 10) == doctest::Approx(0.6).epsilon(1e-15));
  // Third branch: the other arm's mean is below the one-more-failure belief.
  const double mu = 10.0 / 11.0;
  const double expected = mu + 5.0 * ((10.0 + mu) / 12.0);
  CHECK(bkg_score({10, 1}, {1, 10}, 0, 6) == doctest::Approx(expected).epsilon(1e-15));
  CHECK((10.0 + mu) / 12.0 == doctest::Approx(mu).epsilon(1e-15));  // +mean leaves belief fixed
}

TEST_CASE("knowledge-gradient action") {
  CHECK(bkg_action(kUniform, {0, 0, 0, 0}, 0, 5) == Action::mixed);
  CHECK(bkg_action(kUniform, {1, 0, 0, 0}, 1, 5) == Action::pure_c);
  // With no look-ahead the rule coincides with the myopic one, everywhere.
  for (std::uint32_t t = 0; t <= 6; ++t)
    for (const PhysicalState& x : layer_states(t))
      CHECK(bkg_action(kUniform, x, t, t + 1) == bm_action(kUniform, x));
}

TEST_CASE("least-failures-first variants") {
  CHECK(blff_action(kUniform, {0, 0, 0, 1}) == Action::pure_c);
  CHECK(blff_action(kUniform, {3, 1, 0, 1}) == Action::pure_c);  // failure tie, more successes
  CHECK(blff_action(kUniform, {0, 0, 0, 0}) == Action::mixed);
  CHECK(flff_action({0, 1, 0, 0}) == Action::pure_d);
}

TEST_CASE("blff equals flff under equal priors, exhaustively to depth 10") {
  for (const PriorSpec& prior :
       {PriorSpec{1, 1, 1, 1}, PriorSpec{0.5, 0.5, 0.5, 0.5}, PriorSpec{2, 3, 2, 3}}) {
    for (std::uint32_t t = 0; t <= 10; ++t)
      for (const PhysicalState& x : layer_states(t))
        CHECK(blff_action(prior, x) == flff_action(x));
  }
}

TEST_CASE("most-successes-first") {
  CHECK(bmsf_action(kUniform, {2, 0, 1, 0}) == Action::pure_c);
  // Success ties go to the arm with fewer failures (the higher mean).
  CHECK(bmsf_action(kUniform, {1, 5, 1, 0}) == Action::pure_d);
  CHECK(bmsf_action(kUniform, {1, 2, 1, 2}) == Action::mixed);
  CHECK(bmsf_action(kUniform, {0, 0, 0, 0}) == Action::mixed);
}

TEST_CASE("greatest-difference-first") {
  CHECK(bgdf_action(kUniform, {2, 1, 0, 0}) == Action::pure_c);
  // Difference ties go to the arm with more successes.
  CHECK(bgdf_action(kUniform, {1, 0, 2, 1}) == Action::pure_d);
  CHECK(bgdf_action(kUniform, {1, 0, 1, 0}) == Action::mixed);
  // Equal priors make it identical to the frequentist analogue (difference
  // of observed counts), checked against a local reimplementation.
  for (std::uint32_t t = 0; t <= 8; ++t)
    for (const PhysicalState& x : layer_states(t)) {
      const double dc = double(x.s_c) - double(x.f_c);
      const double dd = double(x.s_d) - double(x.f_d);
      Action freq;
      if (dc != dd)
        freq = dc > dd ? Action::pure_c : Action::pure_d;
      else
        freq = x.s_c > x.s_d   ? Action::pure_c
               : x.s_d > x.s_c ? Action::pure_d
                               : Action::mixed;
      CHECK(bgdf_action(kUniform, x) == freq);
    }
}

TEST_CASE("combination stage lengths and dispatch") {
  CHECK(combo_stage_length(4, 60) == 15);  // round(sqrt(240)) = round(15.49)
  CHECK(combo_stage_length(2, 2) == 2);
  CHECK(combo_stage_length(2, 60) == 11);
  CHECK(combo_stage_length(9, 60) == 23);

  const DesignSpec combo = DesignSpec::parse("combo:blff+bm:4");
  // t = 14 is still first stage at T = 60, t = 15 is second stage.
  CHECK(effective_stage(combo, 14, 60).kind == DesignKind::blff);
  CHECK(effective_stage(combo, 15, 60).kind == DesignKind::bm);
  CHECK(action_of(combo, kUniform, {5, 4, 2, 3}, 14, 60) ==
        blff_action(kUniform, {5, 4, 2, 3}));
  CHECK(action_of(combo, kUniform, {5, 4, 2, 3}, 15, 60) == bm_action(kUniform, {5, 4, 2, 3}));
  // At or beyond N the second design acts regardless of state.
  for (const PhysicalState& x : layer_states(16))
    CHECK(action_of(combo, kUniform, x, 16, 60) == bm_action(kUniform, x));
}

TEST_CASE("design name parsing and round trip") {
  for (const char* name :
       {"era", "dp", "bm", "fm", "bkg", "blff", "flff", "bmsf", "bgdf", "ucb:0.18",
        "ucb:2", "combo:blff+bm:4", "combo:blff+ucb:0.18:4", "combo:era+bmsf:2"}) {
    const DesignSpec spec = DesignSpec::parse(name);
    CHECK(spec.name() == name);
    CHECK(DesignSpec::parse(spec.name()) == spec);
  }
  CHECK(DesignSpec::parse("ucb:0.18").ucb_alpha == 0.18);
  CHECK(DesignSpec::parse("combo:blff+ucb:0.18:4").second.ucb_alpha == 0.18);
  CHECK(DesignSpec::parse("combo:blff+ucb:0.18:4").stage_coeff == 4.0);
  CHECK_THROWS_AS(DesignSpec::parse("nonsense"), std::invalid_argument);
  CHECK_THROWS_AS(DesignSpec::parse("ucb:-1"), std::invalid_argument);
  CHECK_THROWS_AS(DesignSpec::parse("combo:blff+bm"), std::invalid_argument);
  CHECK_THROWS_AS(DesignSpec::parse("combo:combo:blff+bm:4+bm:2"), std::invalid_argument);
}

TEST_CASE("dispatcher matches the individual rules") {
  for (std::uint32_t t = 0; t <= 6; ++t) {
    for (const PhysicalState& x : layer_states(t)) {
      CHECK(action_of(DesignSpec::parse("era"), kUniform, x, t, 10) == era_action());
      CHECK(action_of(DesignSpec::parse("bm"), kUniform, x, t, 10) == bm_action(kUniform, x));
      CHECK(action_of(DesignSpec::parse("fm"), kUniform, x, t, 10) == fm_action(x, t));
      CHECK(action_of(DesignSpec::parse("ucb:0.18"), kUniform, x, t, 10) ==
            ucb_action(0.18, x, t));
      CHECK(action_of(DesignSpec::parse("bkg"), kUniform, x, t, 10) ==
            bkg_action(kUniform, x, t, 10));
    }
  }
  CHECK(action_of(DesignSpec::parse("ucb:0.18"), kUniform, {0, 0, 0, 0}, 0, 10) ==
        Action::pure_c);
  CHECK_THROWS_AS(action_of(DesignSpec::parse("dp"), kUniform, {0, 0, 0, 0}, 0, 10),
                  ConfigError);
}

TEST_CASE("arm-swap equivariance for symmetric rules") {
  const std::vector<DesignSpec> symmetric = {
      DesignSpec::parse("era"),  DesignSpec::parse("bm"),   DesignSpec::parse("bkg"),
      DesignSpec::parse("blff"), DesignSpec::parse("flff"), DesignSpec::parse("bmsf"),
      DesignSpec::parse("bgdf")};
  const std::vector<DesignSpec> forced = {DesignSpec::parse("fm"), DesignSpec::parse("ucb:1")};
  const std::uint32_t horizon = 10;
  for (std::uint32_t t = 0; t <= 8; ++t) {
    for (const PhysicalState& x : layer_states(t)) {
      const PhysicalState y = x.mirrored();
      for (const DesignSpec& d : symmetric)
        CHECK(action_of(d, kUniform, y, t, horizon) ==
              swapped(action_of(d, kUniform, x, t, horizon)));
      if (t >= 2) {  // forced-order rules are arm-symmetric after the forced periods
        for (const DesignSpec& d : forced)
          CHECK(action_of(d, kUniform, y, t, horizon) ==
                swapped(action_of(d, kUniform, x, t, horizon)));
      }
    }
  }
}

TEST_CASE("stay-with-a-winner for the index rules") {
  const std::vector<DesignSpec> designs = {DesignSpec::parse("bm"), DesignSpec::parse("fm"),
                                           DesignSpec::parse("bgdf"), DesignSpec::parse("blff")};
  const std::uint32_t horizon = 12;
  for (const DesignSpec& d : designs) {
    // FM's first forced period is exempt: t=1 allocates the other arm by fiat.
    const std::uint32_t t_begin = d.kind == DesignKind::fm ? 1 : 0;
    for (std::uint32_t t = t_begin; t <= 10; ++t) {
      for (const PhysicalState& x : layer_states(t)) {
        const Action a = action_of(d, kUniform, x, t, horizon);
        if (a == Action::pure_c) {
          const PhysicalState next{x.s_c + 1, x.f_c, x.s_d, x.f_d};
          CHECK(action_of(d, kUniform, next, t + 1, horizon) != Action::pure_d);
        } else if (a == Action::pure_d) {
          const PhysicalState next{x.s_c, x.f_c, x.s_d + 1, x.f_d};
          CHECK(action_of(d, kUniform, next, t + 1, horizon) != Action::pure_c);
        }
      }
    }
  }
}

TEST_CASE("every action probability sums to one") {
  for (Action a : {Action::pure_c, Action::pure_d, Action::mixed}) {
    const ActionProb p = to_prob(a);
    CHECK(p.p_c + p.p_d == 1.0);
    CHECK(p.p_c >= 0.0);
    CHECK(p.p_d >= 0.0);
  }
  CHECK_THROWS_AS(to_prob(Action::none), std::invalid_argument);
}
