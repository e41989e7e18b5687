#include "banditfh/evaluator.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <optional>
#include <tuple>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "banditfh/errors.hpp"
#include "banditfh/parallel.hpp"
#include "banditfh/solver.hpp"
#include "banditfh/sweep_detail.hpp"

namespace banditfh {

namespace {

using detail::BlockRef;
using detail::WorkerRange;

// Allocation probability of arm C (and D) per action code; code 0 never
// reaches these tables because providers validate it away.
constexpr double kProbC[4] = {-1.0, 1.0, 0.0, 0.5};
constexpr double kProbD[4] = {-1.0, 0.0, 1.0, 0.5};

Action stage_action(const StageSpec& st, const PriorSpec& prior, const PhysicalState& x,
                    std::uint32_t t, std::uint32_t horizon) {
  switch (st.kind) {
    case DesignKind::era:
      return era_action();
    case DesignKind::bm:
      return bm_action(prior, x);
    case DesignKind::fm:
      return fm_action(x, t);
    case DesignKind::ucb:
      return ucb_action(st.ucb_alpha, x, t);
    case DesignKind::bkg:
      return bkg_action(prior, x, t, horizon);
    case DesignKind::blff:
      return blff_action(prior, x);
    case DesignKind::flff:
      return flff_action(x);
    case DesignKind::bmsf:
      return bmsf_action(prior, x);
    case DesignKind::bgdf:
      return bgdf_action(prior, x);
    case DesignKind::dp:
    case DesignKind::combo:
      break;
  }
  throw std::logic_error("stage_action expects a rule stage");
}

// Knowledge-gradient layer fill with the arm-C quantities hoisted per block.
// Every value is produced by the same division expression as bkg_score, so
// the codes are bit-identical to the per-state dispatcher.
void fill_bkg_block(const PriorSpec& prior, std::uint32_t t, std::uint32_t horizon,
                    const BlockRef& blk, std::uint32_t m, Action* dst) {
  const double steps = double(horizon - t) - 1.0;
  const double s_c = prior.s_c0 + blk.a, f_c = prior.f_c0 + blk.b;
  const double mu_c = s_c / (s_c + f_c);
  const double denom_c = s_c + f_c + 1.0;
  const double mu_c_up = (s_c + 1.0) / denom_c;
  const double mu_c_down = s_c / denom_c;
  const double mu_c_fix = (s_c + mu_c) / denom_c;
  const double n_d = prior.s_d0 + prior.f_d0 + double(m);
  const double denom_d = n_d + 1.0;
  for (std::uint32_t c = 0; c <= m; ++c) {
    const double s_d = prior.s_d0 + c;
    const double mu_d = s_d / n_d;
    double keep_c;
    if (mu_d >= mu_c_up)
      keep_c = mu_d;
    else if (mu_d >= mu_c_down)
      keep_c = (1.0 - mu_c) * mu_d + mu_c * mu_c_up;
    else
      keep_c = mu_c_fix;
    const double score_c = mu_c + steps * keep_c;
    const double mu_d_up = (s_d + 1.0) / denom_d;
    const double mu_d_down = s_d / denom_d;
    double keep_d;
    if (mu_c >= mu_d_up)
      keep_d = mu_c;
    else if (mu_c >= mu_d_down)
      keep_d = (1.0 - mu_d) * mu_c + mu_d * mu_d_up;
    else
      keep_d = (s_d + mu_d) / denom_d;
    const double score_d = mu_d + steps * keep_d;
    dst[c] = score_c > score_d ? Action::pure_c
             : score_d > score_c ? Action::pure_d
                                 : Action::mixed;
  }
}

void fill_rule_codes(const StageSpec& st, const PriorSpec& prior, std::uint32_t t,
                     std::uint32_t horizon, std::span<Action> out, int threads) {
  const std::vector<BlockRef> blocks = detail::layer_blocks(t);
  const std::vector<WorkerRange> ranges = detail::partition_blocks(blocks, out.size(), threads);
  parallel_pieces(ranges.size(), threads, [&](std::size_t w) {
    const WorkerRange& r = ranges[w];
    for (std::size_t bi = r.block_begin; bi < r.block_end; ++bi) {
      const BlockRef& blk = blocks[bi];
      const std::uint32_t m = t - blk.a - blk.b;
      Action* dst = out.data() + blk.base;
      if (st.kind == DesignKind::bkg) {
        fill_bkg_block(prior, t, horizon, blk, m, dst);
        continue;
      }
      for (std::uint32_t c = 0; c <= m; ++c)
        dst[c] = stage_action(st, prior, {blk.a, blk.b, c, m - c}, t, horizon);
    }
  });
}

struct EvalQ {
  // Per-sweep transition machinery; bayes mode uses reciprocal tables of the
  // posterior denominators so the hot loops multiply instead of divide.
  bool bayes = false;
  double theta_c = 0.0, theta_d = 0.0;
  double s_c0 = 0.0, f_c0 = 0.0, s_d0 = 0.0, f_d0 = 0.0;
  std::vector<double> recip_c, recip_d;  // 1/(s0+f0+n)

  static EvalQ make(const Scenario& sc, std::uint32_t horizon) {
    EvalQ q;
    q.bayes = sc.mode == Scenario::Mode::bayesian;
    q.theta_c = sc.theta_c;
    q.theta_d = sc.theta_d;
    q.s_c0 = sc.prior.s_c0;
    q.f_c0 = sc.prior.f_c0;
    q.s_d0 = sc.prior.s_d0;
    q.f_d0 = sc.prior.f_d0;
    if (q.bayes) {
      q.recip_c.resize(horizon + 1);
      q.recip_d.resize(horizon + 1);
      for (std::uint32_t n = 0; n <= horizon; ++n) {
        q.recip_c[n] = 1.0 / (q.s_c0 + q.f_c0 + double(n));
        q.recip_d[n] = 1.0 / (q.s_d0 + q.f_d0 + double(n));
      }
    }
    return q;
  }
};

// One gather step: distribution over layer t becomes the distribution over
// layer t+1.  Contributions are accumulated in the fixed order
// success-on-C, failure-on-C, success-on-D, failure-on-D, so results are
// bit-identical for any worker count.
void gather_layer(const LayerIndexer& idx, const EvalQ& q, std::uint32_t t_out,
                  const std::vector<BlockRef>& blocks, const WorkerRange& r,
                  const double* p_prev, const Action* codes_prev, double* p_out,
                  double* block_mass) {
  const std::uint32_t t = t_out - 1;
  for (std::size_t bi = r.block_begin; bi < r.block_end; ++bi) {
    const BlockRef& blk = blocks[bi];
    const std::uint32_t a = blk.a, b = blk.b;
    const std::uint32_t m1 = t_out - a - b;
    double* out = p_out + blk.base;
    for (std::uint32_t c = 0; c <= m1; ++c) out[c] = 0.0;

    if (a >= 1) {  // predecessor (a-1, b, c, d): success on arm C
      const std::uint64_t base = idx.block_base(t, a - 1, b);
      const double* p = p_prev + base;
      const Action* code = codes_prev + base;
      const double q1 =
          q.bayes ? (q.s_c0 + double(a - 1)) * q.recip_c[a - 1 + b] : q.theta_c;
      for (std::uint32_t c = 0; c <= m1; ++c)
        out[c] += p[c] * kProbC[std::uint8_t(code[c])] * q1;
    }
    if (b >= 1) {  // predecessor (a, b-1, c, d): failure on arm C
      const std::uint64_t base = idx.block_base(t, a, b - 1);
      const double* p = p_prev + base;
      const Action* code = codes_prev + base;
      const double q2 =
          q.bayes ? (q.f_c0 + double(b - 1)) * q.recip_c[a + b - 1] : 1.0 - q.theta_c;
      for (std::uint32_t c = 0; c <= m1; ++c)
        out[c] += p[c] * kProbC[std::uint8_t(code[c])] * q2;
    }
    if (m1 >= 1) {  // predecessors within block (a, b) of layer t
      const std::uint32_t m3 = m1 - 1;
      const std::uint64_t base = idx.block_base(t, a, b);
      const double* p = p_prev + base;
      const Action* code = codes_prev + base;
      const double rd = q.bayes ? q.recip_d[m3] : 0.0;
      // (a, b, c-1, d): success on arm D
      for (std::uint32_t c = 1; c <= m1; ++c) {
        const double q3 = q.bayes ? (q.s_d0 + double(c - 1)) * rd : q.theta_d;
        out[c] += p[c - 1] * kProbD[std::uint8_t(code[c - 1])] * q3;
      }
      // (a, b, c, d-1): failure on arm D
      for (std::uint32_t c = 0; c <= m3; ++c) {
        const double q4 = q.bayes ? (q.f_d0 + double(m3 - c)) * rd : 1.0 - q.theta_d;
        out[c] += p[c] * kProbD[std::uint8_t(code[c])] * q4;
      }
    }

    double mass = 0.0;
    for (std::uint32_t c = 0; c <= m1; ++c) mass += out[c];
    block_mass[bi] = mass;
  }
}

struct ForwardStats {
  double mean = 0.0;
  double sd = 0.0;
  double max_mass_drift = 0.0;
};

// Core forward sweep; invokes `terminal` with the layer-T distribution.
ForwardStats forward_sweep(const CodeProvider& codes, const Scenario& scenario,
                           std::uint32_t horizon, const EvalOptions& opts,
                           const std::function<void(std::span<const double>)>& terminal) {
  scenario.validate();
  if (horizon < 1) throw std::domain_error("horizon must be at least 1");
  if (opts.threads < 1) throw std::invalid_argument("thread count must be >= 1");
  const LayerIndexer idx(horizon);

  MemoryBudget local_budget;
  MemoryBudget& budget = opts.budget != nullptr ? *opts.budget : local_budget;
  const std::uint64_t bytes = (idx.layer_size(horizon) + idx.layer_size(horizon - 1)) * 8 +
                              idx.layer_size(horizon - 1) * sizeof(Action);
  BudgetLease lease(budget, bytes);

  std::vector<double> buf_even(idx.layer_size(horizon));
  std::vector<double> buf_odd(idx.layer_size(horizon - 1));
  auto dist_for = [&](std::uint32_t t) -> std::vector<double>& {
    return (t % 2 == horizon % 2) ? buf_even : buf_odd;
  };
  std::vector<Action> code_buf(idx.layer_size(horizon - 1));

  const EvalQ q = EvalQ::make(scenario, horizon);
  dist_for(0)[0] = 1.0;

  ForwardStats stats;
  std::vector<double> block_mass;
  for (std::uint32_t t = 0; t < horizon; ++t) {
    codes(t, {code_buf.data(), idx.layer_size(t)});
    const std::vector<BlockRef> blocks = detail::layer_blocks(t + 1);
    const std::vector<WorkerRange> ranges =
        detail::partition_blocks(blocks, idx.layer_size(t + 1), opts.threads);
    block_mass.assign(blocks.size(), 0.0);
    const double* p_prev = dist_for(t).data();
    double* p_out = dist_for(t + 1).data();
    parallel_pieces(ranges.size(), opts.threads, [&](std::size_t w) {
      gather_layer(idx, q, t + 1, blocks, ranges[w], p_prev, code_buf.data(), p_out,
                   block_mass.data());
    });
    const double drift = std::abs(pairwise_sum(block_mass) - 1.0);
    stats.max_mass_drift = std::max(stats.max_mass_drift, drift);
    if (drift > 1e-10)
      throw IntegrityError("probability mass drifted by " + std::to_string(drift) +
                           " in layer " + std::to_string(t + 1));
  }

  // Terminal moments: mean first, then central second moment.
  const std::vector<double>& p_final = dist_for(horizon);
  const std::vector<BlockRef> blocks = detail::layer_blocks(horizon);
  std::vector<double> partial(blocks.size(), 0.0);
  const std::vector<WorkerRange> ranges =
      detail::partition_blocks(blocks, idx.layer_size(horizon), opts.threads);
  parallel_pieces(ranges.size(), opts.threads, [&](std::size_t w) {
    for (std::size_t bi = ranges[w].block_begin; bi < ranges[w].block_end; ++bi) {
      const BlockRef& blk = blocks[bi];
      const std::uint32_t m = horizon - blk.a - blk.b;
      const double* p = p_final.data() + blk.base;
      double acc = 0.0;
      for (std::uint32_t c = 0; c <= m; ++c) acc += p[c] * double(blk.a + c);
      partial[bi] = acc;
    }
  });
  stats.mean = pairwise_sum(partial);
  const double mean = stats.mean;
  parallel_pieces(ranges.size(), opts.threads, [&](std::size_t w) {
    for (std::size_t bi = ranges[w].block_begin; bi < ranges[w].block_end; ++bi) {
      const BlockRef& blk = blocks[bi];
      const std::uint32_t m = horizon - blk.a - blk.b;
      const double* p = p_final.data() + blk.base;
      double acc = 0.0;
      for (std::uint32_t c = 0; c <= m; ++c) {
        const double dev = double(blk.a + c) - mean;
        acc += p[c] * dev * dev;
      }
      partial[bi] = acc;
    }
  });
  stats.sd = std::sqrt(std::max(0.0, pairwise_sum(partial)));

  if (terminal) terminal({p_final.data(), idx.layer_size(horizon)});
  return stats;
}

// Fixed-design backward recursion.  kTerminalReward selects the terminal
// reward form (value at layer T is the number of observed successes) over
// the classic per-step form.
template <bool kTerminalReward>
double backward_sweep(const CodeProvider& codes, const Scenario& scenario, std::uint32_t horizon,
                      const EvalOptions& opts) {
  scenario.validate();
  if (horizon < 1) throw std::domain_error("horizon must be at least 1");
  if (opts.threads < 1) throw std::invalid_argument("thread count must be >= 1");
  const LayerIndexer idx(horizon);

  MemoryBudget local_budget;
  MemoryBudget& budget = opts.budget != nullptr ? *opts.budget : local_budget;
  const std::uint64_t bytes = (idx.layer_size(horizon) + idx.layer_size(horizon - 1)) * 8 +
                              idx.layer_size(horizon - 1) * sizeof(Action);
  BudgetLease lease(budget, bytes);

  std::vector<double> buf_even(idx.layer_size(horizon));
  std::vector<double> buf_odd(idx.layer_size(horizon - 1));
  auto values_for = [&](std::uint32_t t) -> std::vector<double>& {
    return (t % 2 == horizon % 2) ? buf_even : buf_odd;
  };
  std::vector<Action> code_buf(idx.layer_size(horizon - 1));

  const EvalQ q = EvalQ::make(scenario, horizon);

  {  // terminal layer
    std::vector<double>& v = values_for(horizon);
    if constexpr (kTerminalReward) {
      const std::vector<BlockRef> blocks = detail::layer_blocks(horizon);
      for (const BlockRef& blk : blocks) {
        const std::uint32_t m = horizon - blk.a - blk.b;
        for (std::uint32_t c = 0; c <= m; ++c) v[blk.base + c] = double(blk.a + c);
      }
    } else {
      std::fill(v.begin(), v.end(), 0.0);
    }
  }

  for (std::uint32_t t = horizon; t-- > 0;) {
    codes(t, {code_buf.data(), idx.layer_size(t)});
    const std::vector<BlockRef> blocks = detail::layer_blocks(t);
    const std::vector<WorkerRange> ranges =
        detail::partition_blocks(blocks, idx.layer_size(t), opts.threads);
    const double* v_next = values_for(t + 1).data();
    double* v_cur = values_for(t).data();
    parallel_pieces(ranges.size(), opts.threads, [&](std::size_t w) {
      const WorkerRange& r = ranges[w];
      for (std::size_t bi = r.block_begin; bi < r.block_end; ++bi) {
        const BlockRef& blk = blocks[bi];
        const std::uint32_t a = blk.a, b = blk.b;
        const std::uint32_t m = t - a - b;
        const double q_c1 = q.bayes ? (q.s_c0 + double(a)) * q.recip_c[a + b] : q.theta_c;
        const double q_c0 =
            q.bayes ? (q.f_c0 + double(b)) * q.recip_c[a + b] : 1.0 - q.theta_c;
        const double rd = q.bayes ? q.recip_d[m] : 0.0;
        const double* succ_sc = v_next + idx.block_base(t + 1, a + 1, b);
        const double* succ_fc = v_next + idx.block_base(t + 1, a, b + 1);
        const double* succ_d = v_next + idx.block_base(t + 1, a, b);
        const Action* code = code_buf.data() + blk.base;
        double* out = v_cur + blk.base;
        for (std::uint32_t c = 0; c <= m; ++c) {
          const double q_d1 = q.bayes ? (q.s_d0 + double(c)) * rd : q.theta_d;
          const double q_d0 = q.bayes ? (q.f_d0 + double(m - c)) * rd : 1.0 - q.theta_d;
          double value_c, value_d;
          if constexpr (kTerminalReward) {
            value_c = q_c1 * succ_sc[c] + q_c0 * succ_fc[c];
            value_d = q_d1 * succ_d[c + 1] + q_d0 * succ_d[c];
          } else {
            value_c = q_c1 * (1.0 + succ_sc[c]) + q_c0 * succ_fc[c];
            value_d = q_d1 * (1.0 + succ_d[c + 1]) + q_d0 * succ_d[c];
          }
          out[c] = kProbC[std::uint8_t(code[c])] * value_c +
                   kProbD[std::uint8_t(code[c])] * value_d;
        }
      }
    });
  }
  return values_for(0)[0];
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string prior_field(const PriorSpec& p) {
  return fmt17(p.s_c0) + ":" + fmt17(p.f_c0) + ":" + fmt17(p.s_d0) + ":" + fmt17(p.f_d0);
}

EvalResult assemble_result(const ForwardStats& stats, const Scenario& scenario,
                           std::uint32_t horizon) {
  EvalResult r;
  r.horizon = horizon;
  r.mean_successes = stats.mean;
  r.sd_successes = stats.sd;
  r.mean_proportion = stats.mean / double(horizon);
  r.sd_proportion = stats.sd / double(horizon);
  const auto [regret, benchmark] = regret_of(stats.mean, scenario, horizon);
  r.mean_regret = regret;
  r.benchmark = benchmark;
  r.sd_regret = stats.sd;  // regret is a constant shift of the success count
  r.max_mass_drift = stats.max_mass_drift;
  return r;
}

}  // namespace

void Scenario::validate() const {
  prior.validate();
  if (prior.haldane_arm())
    throw std::domain_error(
        "Haldane prior is not evaluable: predictive probability undefined before data");
  if (mode == Mode::frequentist) {
    for (double th : {theta_c, theta_d}) {
      if (!std::isfinite(th) || th < 0.0 || th > 1.0)
        throw std::domain_error("success probabilities must lie in [0, 1]");
    }
  }
}

CodeProvider design_code_provider(const DesignSpec& design, const PriorSpec& prior,
                                  std::uint32_t horizon, TableSource* table, int threads) {
  prior.validate();
  if (prior.haldane_arm() &&
      (design.kind == DesignKind::bm || design.kind == DesignKind::bkg ||
       design.kind == DesignKind::dp))
    throw std::domain_error("design needs a defined predictive probability at the root");
  if (design.needs_table()) {
    if (table == nullptr) throw ConfigError("dp design requires a solved action table");
    if (table->horizon() != horizon)
      throw ConfigError("action table solved for horizon " + std::to_string(table->horizon()) +
                        ", requested " + std::to_string(horizon));
    if (!(table->prior() == prior))
      throw ConfigError("action table prior does not match the evaluation prior");
  }
  auto packed = std::make_shared<std::vector<std::uint8_t>>();
  return [design, prior, horizon, table, threads, packed](std::uint32_t t,
                                                          std::span<Action> out) {
    const StageSpec stage = effective_stage(design, t, horizon);
    if (stage.kind == DesignKind::dp) {
      table->fetch_layer(t, *packed);
      unpack_codes({packed->data(), packed->size()}, out);
      for (const Action a : out)
        if (a == Action::none)
          throw TableFormatError("no action stored for a non-terminal state");
    } else {
      fill_rule_codes(stage, prior, t, horizon, out, threads);
    }
  };
}

EvalResult forward_eval_with(const CodeProvider& codes, const Scenario& scenario,
                             std::uint32_t horizon, const EvalOptions& opts) {
  const ForwardStats stats = forward_sweep(codes, scenario, horizon, opts, nullptr);
  return assemble_result(stats, scenario, horizon);
}

EvalResult forward_eval(const DesignSpec& design, const Scenario& scenario, std::uint32_t horizon,
                        const EvalOptions& opts, TableSource* table) {
  const CodeProvider codes =
      design_code_provider(design, scenario.prior, horizon, table, opts.threads);
  return forward_eval_with(codes, scenario, horizon, opts);
}

std::vector<double> forward_terminal(const CodeProvider& codes, const Scenario& scenario,
                                     std::uint32_t horizon, const EvalOptions& opts) {
  std::vector<double> terminal;
  forward_sweep(codes, scenario, horizon, opts,
                [&](std::span<const double> p) { terminal.assign(p.begin(), p.end()); });
  return terminal;
}

double backward_mean_classic_with(const CodeProvider& codes, const Scenario& scenario,
                                  std::uint32_t horizon, const EvalOptions& opts) {
  return backward_sweep<false>(codes, scenario, horizon, opts);
}

double backward_mean_classic(const DesignSpec& design, const Scenario& scenario,
                             std::uint32_t horizon, const EvalOptions& opts, TableSource* table) {
  const CodeProvider codes =
      design_code_provider(design, scenario.prior, horizon, table, opts.threads);
  return backward_mean_classic_with(codes, scenario, horizon, opts);
}

double backward_mean_terminal_with(const CodeProvider& codes, const Scenario& scenario,
                                   std::uint32_t horizon, const EvalOptions& opts) {
  return backward_sweep<true>(codes, scenario, horizon, opts);
}

double backward_mean_terminal(const DesignSpec& design, const Scenario& scenario,
                              std::uint32_t horizon, const EvalOptions& opts,
                              TableSource* table) {
  const CodeProvider codes =
      design_code_provider(design, scenario.prior, horizon, table, opts.threads);
  return backward_mean_terminal_with(codes, scenario, horizon, opts);
}

std::pair<double, double> regret_of(double mean_successes, const Scenario& scenario,
                                    std::uint32_t horizon) {
  scenario.validate();
  const double slack = 1e-6 * double(horizon) + 1e-9;
  if (!(mean_successes >= -slack && mean_successes <= double(horizon) + slack))
    throw std::domain_error("mean successes must lie in [0, T]");
  double benchmark;
  if (scenario.mode == Scenario::Mode::frequentist) {
    benchmark = double(horizon) * std::max(scenario.theta_c, scenario.theta_d);
  } else {
    benchmark = double(horizon) * expected_max({scenario.prior.s_c0, scenario.prior.f_c0},
                                               {scenario.prior.s_d0, scenario.prior.f_d0});
  }
  return {benchmark - mean_successes, benchmark};
}

void write_csv_header(std::ostream& out) { out << kCsvHeader << "\n"; }

void write_csv_row(std::ostream& out, std::string_view design_name, const Scenario& scenario,
                   const EvalResult& r) {
  const bool freq = scenario.mode == Scenario::Mode::frequentist;
  out << design_name << ',' << r.horizon << ',' << (freq ? "freq" : "bayes") << ','
      << (freq ? fmt17(scenario.theta_c) : "") << ',' << (freq ? fmt17(scenario.theta_d) : "")
      << ',' << prior_field(scenario.prior) << ',' << fmt17(r.mean_successes) << ','
      << fmt17(r.sd_successes) << ',' << fmt17(r.mean_proportion) << ','
      << fmt17(r.sd_proportion) << ',' << fmt17(r.mean_regret) << ',' << fmt17(r.sd_regret)
      << "\n";
}

namespace {

// A solved DP table held either in memory or in a scratch file.
struct SolvedTable {
  std::optional<ActionTable> ram;
  std::filesystem::path file;
  std::unique_ptr<TableSource> source;

  ~SolvedTable() {
    source.reset();
    if (!file.empty()) {
      std::error_code ec;
      std::filesystem::remove(file, ec);
    }
  }
};

std::unique_ptr<SolvedTable> solve_for_sweep(const PriorSpec& prior, std::uint32_t horizon,
                                             const SweepOptions& opts) {
  auto solved = std::make_unique<SolvedTable>();
  SolveOptions sopts;
  sopts.threads = opts.threads;
  sopts.budget = opts.budget;
  const LayerIndexer idx(horizon);
  const std::uint64_t table_bytes = packed_payload_bytes(idx);
  const std::uint64_t sweep_bytes =
      (idx.layer_size(horizon) + idx.layer_size(horizon - 1)) * 9;  // value pair + codes
  const std::uint64_t cap =
      opts.budget != nullptr ? opts.budget->cap() : kDefaultMemCapBytes;
  if (table_bytes + sweep_bytes + (idx.layer_size(horizon) + idx.layer_size(horizon - 1)) * 8 <=
      cap) {
    SolveResult r = solve_with_table(prior, horizon, sopts);
    solved->ram = std::move(*r.table);
    solved->source = std::make_unique<RamTableSource>(*solved->ram);
    return solved;
  }
  // Too large to pin in memory: stream the table through a scratch file.
  const std::filesystem::path dir =
      opts.scratch_dir.empty() ? std::filesystem::temp_directory_path() : opts.scratch_dir;
  static std::atomic<unsigned> counter{0};
  solved->file = dir / ("banditfh-dp-" + std::to_string(horizon) + "-" +
                        std::to_string(::getpid()) + "-" +
                        std::to_string(counter.fetch_add(1)) + ".bfh");
  solve_to_file(prior, horizon, solved->file, sopts);
  // Freshly written by this process; skip the checksum re-scan.
  solved->source = std::make_unique<FileTableSource>(solved->file, FileTableSource::Verify::none);
  return solved;
}

struct PriorKey {
  double a, b, c, d;
  friend bool operator<(const PriorKey& x, const PriorKey& y) {
    return std::tie(x.a, x.b, x.c, x.d) < std::tie(y.a, y.b, y.c, y.d);
  }
};

}  // namespace

void table_sweep(std::span<const DesignSpec> designs, std::span<const Scenario> scenarios,
                 std::span<const std::uint32_t> horizons, std::ostream& out,
                 const SweepOptions& opts) {
  if (designs.empty() || scenarios.empty() || horizons.empty())
    throw std::invalid_argument("table sweep requires designs, scenarios and horizons");
  for (const Scenario& sc : scenarios) sc.validate();
  const bool any_dp =
      std::any_of(designs.begin(), designs.end(), [](const DesignSpec& d) { return d.needs_table(); });

  // rows[(design, scenario, horizon)] emitted in that order after computing
  // horizon-major (one DP solve per horizon and prior).
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::string> rows;
  EvalOptions eopts;
  eopts.threads = opts.threads;
  eopts.budget = opts.budget;

  for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
    const std::uint32_t horizon = horizons[hi];
    std::map<PriorKey, std::unique_ptr<SolvedTable>> tables;
    if (any_dp) {
      for (const Scenario& sc : scenarios) {
        const PriorKey key{sc.prior.s_c0, sc.prior.f_c0, sc.prior.s_d0, sc.prior.f_d0};
        if (!tables.count(key)) tables[key] = solve_for_sweep(sc.prior, horizon, opts);
      }
    }
    for (std::size_t si = 0; si < scenarios.size(); ++si) {
      const Scenario& sc = scenarios[si];
      const PriorKey key{sc.prior.s_c0, sc.prior.f_c0, sc.prior.s_d0, sc.prior.f_d0};
      for (std::size_t di = 0; di < designs.size(); ++di) {
        const DesignSpec& design = designs[di];
        try {
          TableSource* table =
              design.needs_table() ? tables.at(key)->source.get() : nullptr;
          const EvalResult r = forward_eval(design, sc, horizon, eopts, table);
          std::ostringstream row;
          write_csv_row(row, design.name(), sc, r);
          rows[{di, si, hi}] = row.str();
        } catch (const std::exception& e) {
          throw std::runtime_error("evaluation failed for design=" + design.name() +
                                   " scenario=" + (sc.mode == Scenario::Mode::frequentist
                                                       ? fmt17(sc.theta_c) + "," + fmt17(sc.theta_d)
                                                       : std::string("bayes")) +
                                   " T=" + std::to_string(horizon) + ": " + e.what());
        }
      }
    }
  }
  write_csv_header(out);
  for (const auto& [key, row] : rows) out << row;
}

}  // namespace banditfh
