#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "banditfh/beta.hpp"
#include "banditfh/errors.hpp"
#include "banditfh/solver.hpp"

using namespace banditfh;

namespace {

const PriorSpec kUniform{1, 1, 1, 1};

}  // namespace

TEST_CASE("one-subject problem is worth one half under uniform priors") {
  const SolveResult r = solve(kUniform, 1);
  CHECK(r.bayes_successes == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.root_action == Action::mixed);
}

TEST_CASE("two-subject problem is worth 13/12 under uniform priors") {
  // Hand tree: first allocation arbitrary by symmetry; stay on success
  // (posterior mean 2/3), switch on failure (mean 1/2):
  // 1/2 (1 + 2/3) + 1/2 (1/2) = 13/12.
  const SolveResult r = solve(kUniform, 2);
  CHECK(std::abs(r.bayes_successes - 13.0 / 12.0) <= 1e-14);
  CHECK(r.root_action == Action::mixed);
  CHECK(r.root_value_c == doctest::Approx(r.root_value_d).epsilon(1e-15));
}

TEST_CASE("solver rejects bad inputs") {
  CHECK_THROWS_AS((void)solve(kUniform, 0), std::domain_error);
  const PriorSpec haldane{0, 0, 1, 1};
  CHECK_THROWS_AS((void)solve(haldane, 5), std::domain_error);
  const PriorSpec negative{-1, 1, 1, 1};
  CHECK_THROWS_AS((void)solve(negative, 5), std::domain_error);
}

TEST_CASE("memory cap refusal reports the requirement") {
  MemoryBudget tiny(1024);
  SolveOptions opts;
  opts.budget = &tiny;
  try {
    (void)solve(kUniform, 50, opts);
    FAIL("expected a MemoryCapError");
  } catch (const MemoryCapError& e) {
    CHECK(e.required_bytes > 1024);
    CHECK(e.cap_bytes == 1024);
  }
}

TEST_CASE("peak value storage is exactly two consecutive layers") {
  for (std::uint32_t horizon : {5u, 17u, 40u}) {
    MemoryBudget budget;
    SolveOptions opts;
    opts.budget = &budget;
    const SolveResult r = solve(kUniform, horizon, opts);
    const LayerIndexer idx(horizon);
    const std::uint64_t two_layers = (idx.layer_size(horizon) + idx.layer_size(horizon - 1)) * 8;
    CHECK(r.peak_value_bytes == two_layers);
    CHECK(budget.peak() == two_layers);
    CHECK(r.peak_value_bytes <= 2 * idx.layer_size(horizon) * 8);
  }
}

TEST_CASE("value bracketing between the best-arm mean and the expected maximum") {
  for (const PriorSpec prior :
       {PriorSpec{1, 1, 1, 1}, PriorSpec{2, 1, 1, 3}, PriorSpec{0.5, 0.5, 0.5, 0.5}}) {
    for (std::uint32_t horizon : {3u, 10u, 25u}) {
      const double v = solve(prior, horizon).bayes_successes;
      const double best_mean = std::max(predictive_success({prior.s_c0, prior.f_c0}),
                                        predictive_success({prior.s_d0, prior.f_d0}));
      const double emax = expected_max({prior.s_c0, prior.f_c0}, {prior.s_d0, prior.f_d0});
      CHECK(v >= horizon * best_mean - 1e-9 * horizon);
      CHECK(v <= horizon * emax + 1e-9 * horizon);
    }
  }
}

TEST_CASE("value increases with the horizon") {
  double previous = 0.0;
  for (std::uint32_t horizon = 1; horizon <= 30; ++horizon) {
    const double v = solve(kUniform, horizon).bayes_successes;
    CHECK(v > previous);
    previous = v;
  }
}

TEST_CASE("thread count does not change values or actions") {
  SolveOptions serial;
  serial.threads = 1;
  SolveOptions parallel;
  parallel.threads = 5;
  const SolveResult a = solve_with_table(kUniform, 21, serial);
  const SolveResult b = solve_with_table(kUniform, 21, parallel);
  CHECK(a.bayes_successes == b.bayes_successes);  // bit-identical by contract
  CHECK(std::equal(a.table->payload().begin(), a.table->payload().end(),
                   b.table->payload().begin(), b.table->payload().end()));
}

TEST_CASE("mirror symmetry of the table under symmetric priors") {
  for (const PriorSpec prior : {PriorSpec{1, 1, 1, 1}, PriorSpec{0.5, 0.5, 0.5, 0.5}}) {
    const SolveResult r = solve_with_table(prior, 25);
    const LayerIndexer& idx = r.table->indexer();
    for (std::uint32_t t = 0; t < 25; ++t) {
      for (std::uint64_t i = 0; i < idx.layer_size(t); ++i) {
        const PhysicalState x = idx.unrank(t, i);
        const Action a = r.table->code(t, i);
        const Action mirrored = r.table->code_at(x.mirrored());
        if (a == Action::mixed)
          CHECK(mirrored == Action::mixed);
        else
          CHECK(mirrored == (a == Action::pure_c ? Action::pure_d : Action::pure_c));
      }
    }
  }
}

TEST_CASE("stay-with-a-winner on the solved table") {
  const SolveResult r = solve_with_table(kUniform, 20);
  const LayerIndexer& idx = r.table->indexer();
  for (std::uint32_t t = 0; t + 2 <= 20; ++t) {
    for (std::uint64_t i = 0; i < idx.layer_size(t); ++i) {
      const PhysicalState x = idx.unrank(t, i);
      const Action a = r.table->code(t, i);
      if (a == Action::pure_c) {
        CHECK(r.table->code_at({x.s_c + 1, x.f_c, x.s_d, x.f_d}) == Action::pure_c);
      } else if (a == Action::pure_d) {
        CHECK(r.table->code_at({x.s_c, x.f_c, x.s_d + 1, x.f_d}) == Action::pure_d);
      }
    }
  }
}

TEST_CASE("online mode agrees with the stored table everywhere, to horizon 25") {
  for (const PriorSpec prior : {PriorSpec{1, 1, 1, 1}, PriorSpec{0.5, 0.5, 0.5, 0.5}}) {
    const std::uint32_t horizon = 25;
    const SolveResult r = solve_with_table(prior, horizon);
    const LayerIndexer& idx = r.table->indexer();
    std::uint64_t mismatches = 0;
    for (std::uint32_t t = 0; t < horizon; ++t) {
      for (std::uint64_t i = 0; i < idx.layer_size(t); ++i) {
        const PhysicalState x = idx.unrank(t, i);
        if (optimal_action(prior, x, t, horizon) != r.table->code(t, i)) ++mismatches;
      }
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("online mode examples") {
  CHECK(optimal_action(kUniform, {0, 0, 0, 0}, 0, 2) == Action::mixed);
  // Last period is myopic: posterior means 2/3 vs 1/2.
  CHECK(optimal_action(kUniform, {1, 0, 0, 0}, 1, 2) == Action::pure_c);
  CHECK_THROWS_AS((void)optimal_action(kUniform, {1, 0, 0, 0}, 1, 1), std::domain_error);
  CHECK_THROWS_AS((void)optimal_action(kUniform, {1, 0, 0, 0}, 0, 5), std::domain_error);
}
