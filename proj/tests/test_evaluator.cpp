#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "banditfh/errors.hpp"
#include "banditfh/evaluator.hpp"
#include "banditfh/solver.hpp"

using namespace banditfh;

namespace {

const PriorSpec kUniform{1, 1, 1, 1};

// Deterministic pseudo-random state-dependent design, for exercising the
// fixed-design recursions on rules outside the catalogue.
CodeProvider hash_design(std::uint64_t salt) {
  return [salt](std::uint32_t t, std::span<Action> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint64_t h = salt ^ (std::uint64_t(t) << 40) ^ i;
      h ^= h >> 33;
      h *= 0xff51afd7ed558ccdull;
      h ^= h >> 33;
      out[i] = static_cast<Action>(1 + h % 3);
    }
  };
}

}  // namespace

TEST_CASE("equal randomized allocation has a closed form, frequentist") {
  const Scenario sc = Scenario::frequentist(0.7, 0.9, kUniform);
  const EvalResult r = forward_eval(DesignSpec::parse("era"), sc, 60);
  CHECK(r.mean_regret == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(r.mean_proportion == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(r.sd_successes == doctest::Approx(std::sqrt(60.0 * 1.6 * 0.4 / 4.0)).epsilon(1e-12));
  CHECK(r.sd_regret == r.sd_successes);
  CHECK(r.max_mass_drift <= 1e-12);
}

TEST_CASE("equal randomized allocation closed form holds for random scenarios") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const double tc = unit(rng), td = unit(rng);
    const std::uint32_t horizon = 11 + std::uint32_t(rng() % 40);
    const Scenario sc = Scenario::frequentist(tc, td, kUniform);
    const EvalResult r = forward_eval(DesignSpec::parse("era"), sc, horizon);
    CHECK(r.mean_proportion == doctest::Approx((tc + td) / 2.0).epsilon(1e-12));
    const double sd_prop = std::sqrt((tc + td) * (2.0 - tc - td) / (4.0 * horizon));
    CHECK(r.sd_proportion == doctest::Approx(sd_prop).epsilon(1e-12));
  }
}

TEST_CASE("equal randomized allocation, Bayesian uniform") {
  for (std::uint32_t horizon : {1u, 2u, 13u, 60u}) {
    const EvalResult r =
        forward_eval(DesignSpec::parse("era"), Scenario::bayesian(kUniform), horizon);
    CHECK(r.mean_successes == doctest::Approx(horizon / 2.0).epsilon(1e-12));
    CHECK(r.mean_regret == doctest::Approx(horizon / 6.0).epsilon(1e-9));
  }
}

TEST_CASE("reference frequentist regret value for the myopic design") {
  const Scenario sc = Scenario::frequentist(0.7, 0.9, kUniform);
  const EvalResult r = forward_eval(DesignSpec::parse("bm"), sc, 120);
  CHECK(r.mean_regret == doctest::Approx(7.53).epsilon(0.005));
}

TEST_CASE("dp evaluation in bayes mode reproduces the solver value") {
  for (std::uint32_t horizon : {1u, 2u, 9u, 24u}) {
    const SolveResult solved = solve_with_table(kUniform, horizon);
    RamTableSource table(*solved.table);
    const EvalResult r = forward_eval(DesignSpec::parse("dp"), Scenario::bayesian(kUniform),
                                      horizon, {}, &table);
    CHECK(r.mean_successes == doctest::Approx(solved.bayes_successes).epsilon(1e-12));
  }
  // The two-subject value is 13/12 with regret 4/3 - 13/12 = 1/4.
  const SolveResult solved = solve_with_table(kUniform, 2);
  RamTableSource table(*solved.table);
  const EvalResult r =
      forward_eval(DesignSpec::parse("dp"), Scenario::bayesian(kUniform), 2, {}, &table);
  CHECK(std::abs(r.mean_successes - 13.0 / 12.0) <= 1e-14);
  CHECK(r.mean_regret == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("backward classic evaluation examples") {
  CHECK(backward_mean_classic(DesignSpec::parse("era"),
                              Scenario::frequentist(0.5, 0.5, kUniform), 10) ==
        doctest::Approx(5.0).epsilon(1e-13));
  const SolveResult solved = solve_with_table(kUniform, 2);
  RamTableSource table(*solved.table);
  CHECK(std::abs(backward_mean_classic(DesignSpec::parse("dp"), Scenario::bayesian(kUniform), 2,
                                       {}, &table) -
                 13.0 / 12.0) <= 1e-14);
  CHECK(std::abs(backward_mean_terminal(DesignSpec::parse("dp"), Scenario::bayesian(kUniform), 2,
                                        {}, &table) -
                 13.0 / 12.0) <= 1e-14);
}

TEST_CASE("terminal-form evaluation at one step returns theta") {
  for (const char* name : {"era", "bm", "blff", "ucb:1"}) {
    const Scenario sc = Scenario::frequentist(0.35, 0.35, kUniform);
    CHECK(backward_mean_terminal(DesignSpec::parse(name), sc, 1) ==
          doctest::Approx(0.35).epsilon(1e-15));
  }
}

TEST_CASE("forward, classic and terminal means agree for random designs") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 12; ++i) {
    const CodeProvider design = hash_design(rng());
    const std::uint32_t horizon = 10 + std::uint32_t(rng() % 50);
    const Scenario sc = (i % 2 == 0) ? Scenario::frequentist(0.7, 0.9, kUniform)
                                     : Scenario::bayesian(kUniform);
    const double fwd = forward_eval_with(design, sc, horizon).mean_successes;
    const double classic = backward_mean_classic_with(design, sc, horizon);
    const double terminal = backward_mean_terminal_with(design, sc, horizon);
    CHECK(std::abs(fwd - classic) <= 1e-9 * horizon);
    CHECK(std::abs(classic - terminal) <= 1e-8);
  }
}

TEST_CASE("arm-swap symmetry of frequentist results for symmetric designs") {
  for (const char* name : {"era", "bm", "bkg", "blff", "bmsf", "bgdf"}) {
    const DesignSpec design = DesignSpec::parse(name);
    const EvalResult ab = forward_eval(design, Scenario::frequentist(0.3, 0.8, kUniform), 17);
    const EvalResult ba = forward_eval(design, Scenario::frequentist(0.8, 0.3, kUniform), 17);
    CHECK(ab.mean_successes == doctest::Approx(ba.mean_successes).epsilon(1e-12));
    CHECK(ab.sd_successes == doctest::Approx(ba.sd_successes).epsilon(1e-12));
  }
}

TEST_CASE("regret computation") {
  const Scenario freq = Scenario::frequentist(0.7, 0.9, kUniform);
  auto [regret, benchmark] = regret_of(48.0, freq, 60);
  CHECK(regret == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(benchmark == doctest::Approx(54.0).epsilon(1e-12));
  std::tie(regret, benchmark) = regret_of(54.0, freq, 60);
  CHECK(regret == doctest::Approx(0.0).epsilon(1e-12));
  const Scenario bayes = Scenario::bayesian(kUniform);
  std::tie(regret, benchmark) = regret_of(13.0 / 12.0, bayes, 2);
  CHECK(regret == doctest::Approx(0.25).epsilon(1e-9));
  CHECK_THROWS_AS(regret_of(61.0, freq, 60), std::domain_error);
}

TEST_CASE("scenario validation") {
  CHECK_THROWS_AS(Scenario::frequentist(1.2, 0.5, kUniform).validate(), std::domain_error);
  const PriorSpec haldane{0, 0, 1, 1};
  CHECK_THROWS_AS(Scenario::bayesian(haldane).validate(), std::domain_error);
  CHECK_NOTHROW(Scenario::frequentist(0.0, 1.0, kUniform).validate());
}

TEST_CASE("dp evaluation requires a matching table") {
  const SolveResult solved = solve_with_table(kUniform, 5);
  RamTableSource table(*solved.table);
  CHECK_THROWS_AS(
      (void)forward_eval(DesignSpec::parse("dp"), Scenario::bayesian(kUniform), 6, {}, &table),
      ConfigError);
  const PriorSpec other{2, 1, 1, 1};
  CHECK_THROWS_AS(
      (void)forward_eval(DesignSpec::parse("dp"), Scenario::bayesian(other), 5, {}, &table),
      ConfigError);
  CHECK_THROWS_AS(
      (void)forward_eval(DesignSpec::parse("dp"), Scenario::bayesian(kUniform), 5, {}, nullptr),
      ConfigError);
}

TEST_CASE("layer code providers agree with the per-state dispatcher") {
  // Covers the block-hoisted fills (knowledge gradient in particular);
  // priors with exactly representable sums keep the comparison bitwise.
  const std::uint32_t horizon = 12;
  const LayerIndexer idx(horizon);
  std::vector<Action> codes(idx.layer_size(horizon - 1));
  for (const PriorSpec& prior :
       {PriorSpec{1, 1, 1, 1}, PriorSpec{0.5, 0.5, 0.5, 0.5}, PriorSpec{2, 1, 1, 3}}) {
    for (const char* name :
         {"era", "bm", "fm", "ucb:0.18", "bkg", "blff", "flff", "bmsf", "bgdf",
          "combo:blff+bm:4", "combo:era+bmsf:2"}) {
      const DesignSpec design = DesignSpec::parse(name);
      const CodeProvider provider = design_code_provider(design, prior, horizon);
      for (std::uint32_t t = 0; t < horizon; ++t) {
        provider(t, {codes.data(), idx.layer_size(t)});
        for (std::uint64_t i = 0; i < idx.layer_size(t); ++i)
          CHECK(codes[i] == action_of(design, prior, idx.unrank(t, i), t, horizon));
      }
    }
  }
}

TEST_CASE("results do not depend on the thread count") {
  const Scenario sc = Scenario::frequentist(0.4, 0.65, kUniform);
  for (const char* name : {"bm", "ucb:0.18", "combo:blff+bm:4"}) {
    EvalOptions serial;
    serial.threads = 1;
    EvalOptions parallel;
    parallel.threads = 7;
    const EvalResult a = forward_eval(DesignSpec::parse(name), sc, 33, serial);
    const EvalResult b = forward_eval(DesignSpec::parse(name), sc, 33, parallel);
    CHECK(a.mean_successes == b.mean_successes);  // bit-identical
    CHECK(a.sd_successes == b.sd_successes);
  }
}

TEST_CASE("csv output format") {
  std::ostringstream out;
  write_csv_header(out);
  const Scenario sc = Scenario::frequentist(0.7, 0.9, kUniform);
  const EvalResult r = forward_eval(DesignSpec::parse("era"), sc, 60);
  write_csv_row(out, "era", sc, r);
  const std::string text = out.str();
  CHECK(text.substr(0, std::string(kCsvHeader).size()) == kCsvHeader);
  CHECK(text.find("era,60,freq,") != std::string::npos);
  // 17-significant-digit round trip of theta.
  CHECK(text.find("0.69999999999999996") != std::string::npos);
  CHECK(text.find("1:1:1:1") != std::string::npos);

  std::ostringstream bayes_out;
  const Scenario sb = Scenario::bayesian(kUniform);
  write_csv_row(bayes_out, "era", sb, forward_eval(DesignSpec::parse("era"), sb, 4));
  CHECK(bayes_out.str().find("era,4,bayes,,,1:1:1:1,") != std::string::npos);
}

TEST_CASE("table sweep emits rows in design-major order and solves dp tables") {
  const DesignSpec designs[] = {DesignSpec::parse("era"), DesignSpec::parse("dp")};
  const Scenario scenarios[] = {Scenario::frequentist(0.7, 0.9, kUniform)};
  const std::uint32_t horizons[] = {4, 8};
  std::ostringstream out;
  table_sweep(designs, scenarios, horizons, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == std::string(kCsvHeader));
  std::vector<std::string> prefixes;
  while (std::getline(in, line)) prefixes.push_back(line.substr(0, line.find(",freq") + 5));
  REQUIRE(prefixes.size() == 4);
  CHECK(prefixes[0].substr(0, 7) == "era,4,f");
  CHECK(prefixes[1].substr(0, 7) == "era,8,f");
  CHECK(prefixes[2].substr(0, 6) == "dp,4,f");
  CHECK(prefixes[3].substr(0, 6) == "dp,8,f");
}
