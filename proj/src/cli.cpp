#include "banditfh/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "banditfh/action_table.hpp"
#include "banditfh/errors.hpp"
#include "banditfh/evaluator.hpp"
#include "banditfh/simulate.hpp"
#include "banditfh/solver.hpp"

namespace banditfh {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRefused = 3;
constexpr int kExitIo = 4;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_doubles(const std::string& text, std::size_t count,
                                  const char* what) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("bad ") + what + " value '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (values.size() != count)
    throw std::invalid_argument(std::string(what) + " needs " + std::to_string(count) +
                                " comma-separated values");
  return values;
}

PriorSpec parse_prior(const std::string& text) {
  const auto v = parse_doubles(text, 4, "prior");
  PriorSpec prior{v[0], v[1], v[2], v[3]};
  prior.validate();
  return prior;
}

std::pair<double, double> parse_theta(const std::string& text) {
  const auto v = parse_doubles(text, 2, "theta");
  return {v[0], v[1]};
}

PhysicalState parse_state(const std::string& text) {
  const auto v = parse_doubles(text, 4, "state");
  PhysicalState x;
  std::uint32_t* fields[4] = {&x.s_c, &x.f_c, &x.s_d, &x.f_d};
  for (int i = 0; i < 4; ++i) {
    if (v[i] < 0 || v[i] != std::floor(v[i]) || v[i] > double(UINT32_MAX))
      throw std::invalid_argument("state counts must be nonnegative integers");
    *fields[i] = static_cast<std::uint32_t>(v[i]);
  }
  return x;
}

// Horizons: a single value, a comma list, or an inclusive start:step:stop range.
std::vector<std::uint32_t> parse_horizons(const std::string& text) {
  std::vector<std::uint32_t> out;
  auto to_u32 = [](const std::string& s) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size() || v < 1 || v > static_cast<long long>(UINT32_MAX))
        throw std::invalid_argument(s);
      return static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad horizon value '" + s + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    const auto first = text.find(':');
    const auto second = text.find(':', first + 1);
    if (second == std::string::npos)
      throw std::invalid_argument("horizon range syntax is start:step:stop");
    const std::uint32_t start = to_u32(text.substr(0, first));
    const std::uint32_t step = to_u32(text.substr(first + 1, second - first - 1));
    const std::uint32_t stop = to_u32(text.substr(second + 1));
    for (std::uint64_t t = start; t <= stop; t += step) out.push_back(std::uint32_t(t));
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t comma = text.find(',', pos);
      out.push_back(to_u32(text.substr(pos, comma == std::string::npos ? comma : comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  if (out.empty()) throw std::invalid_argument("horizon list is empty");
  return out;
}

// The design roster of the comparison tables, in row order.
const std::vector<std::string> kRosterNames = {
    "era",  "dp",   "bm",   "fm",   "ucb:2", "ucb:1", "ucb:0.18",
    "bkg",  "blff", "bmsf", "bgdf", "combo:blff+bm:4", "combo:blff+ucb:2:4",
    "combo:blff+ucb:1:4", "combo:blff+ucb:0.18:4", "combo:blff+bmsf:9", "combo:era+bmsf:2"};

std::vector<DesignSpec> parse_designs(const std::vector<std::string>& names) {
  std::vector<DesignSpec> designs;
  for (const std::string& name : names) {
    if (name == "all") {
      for (const std::string& n : kRosterNames) designs.push_back(DesignSpec::parse(n));
    } else {
      designs.push_back(DesignSpec::parse(name));
    }
  }
  if (designs.empty()) throw std::invalid_argument("no designs given");
  return designs;
}

std::uint64_t default_mem_cap() {
  if (const char* env = std::getenv("BANDITFH_MEM_CAP_BYTES")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0' || v == 0)
      throw std::invalid_argument("BANDITFH_MEM_CAP_BYTES must be a positive integer");
    return v;
  }
  return kDefaultMemCapBytes;
}

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

struct CommonArgs {
  int threads = default_threads();
  std::uint64_t mem_cap = 0;  // resolved after parsing (flag > env > default)
  bool mem_cap_set = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--threads", threads, "worker thread cap")->check(CLI::PositiveNumber);
    cmd->add_option("--mem-cap", mem_cap, "memory cap in bytes")
        ->check(CLI::PositiveNumber)
        ->each([this](const std::string&) { mem_cap_set = true; });
  }
  std::uint64_t cap() const { return mem_cap_set ? mem_cap : default_mem_cap(); }
};

struct ScenarioArgs {
  std::string theta_text;
  bool bayes = false;
  std::string prior_text = "1,1,1,1";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--theta", theta_text, "true success probabilities theta_C,theta_D");
    cmd->add_flag("--bayes", bayes, "evaluate under the Beta predictive law");
    cmd->add_option("--prior", prior_text, "prior pseudo-counts s_C,f_C,s_D,f_D");
  }
  Scenario scenario() const {
    const PriorSpec prior = parse_prior(prior_text);
    if (bayes) {
      if (!theta_text.empty())
        throw std::invalid_argument("--theta and --bayes are mutually exclusive");
      return Scenario::bayesian(prior);
    }
    if (theta_text.empty())
      throw std::invalid_argument("either --theta tC,tD or --bayes is required");
    const auto [tc, td] = parse_theta(theta_text);
    return Scenario::frequentist(tc, td, prior);
  }
};

std::ostream& open_output(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty()) return fallback;
  file.open(path);
  if (!file)
    throw std::system_error(errno, std::generic_category(), "cannot open '" + path + "'");
  return file;
}

int cmd_solve(const std::string& prior_text, std::uint32_t horizon, const std::string& out_path,
              const CommonArgs& common, std::ostream& out) {
  const PriorSpec prior = parse_prior(prior_text);
  MemoryBudget budget(common.cap());
  SolveOptions opts;
  opts.threads = common.threads;
  opts.budget = &budget;
  const SolveResult result = solve_to_file(prior, horizon, out_path, opts);
  const LayerIndexer idx(horizon);
  out << "T=" << horizon << " prior=" << prior_text << " bayes_successes="
      << fmt17(result.bayes_successes) << " peak_bytes=" << budget.peak()
      << " table_bytes=" << (kTableHeaderBytes + packed_payload_bytes(idx) + 4)
      << " wall_seconds=" << result.wall_seconds << "\n";
  return kExitOk;
}

int cmd_eval(const std::vector<std::string>& design_names, const ScenarioArgs& scenario_args,
             const std::string& horizons_text, const std::string& out_path,
             const std::string& table_path, const CommonArgs& common, std::ostream& out) {
  const std::vector<DesignSpec> designs = parse_designs(design_names);
  const Scenario scenario = scenario_args.scenario();
  const std::vector<std::uint32_t> horizons = parse_horizons(horizons_text);
  MemoryBudget budget(common.cap());
  std::ofstream file;
  std::ostream& sink = open_output(out_path, file, out);

  if (!table_path.empty()) {
    FileTableSource table(table_path);
    if (!(table.prior() == scenario.prior))
      throw ConfigError("action table prior does not match --prior");
    EvalOptions eopts;
    eopts.threads = common.threads;
    eopts.budget = &budget;
    write_csv_header(sink);
    for (const DesignSpec& design : designs) {
      for (const std::uint32_t horizon : horizons) {
        if (design.needs_table() && horizon != table.horizon())
          throw ConfigError("action table solved for horizon " +
                            std::to_string(table.horizon()) + ", requested " +
                            std::to_string(horizon));
        const EvalResult r = forward_eval(design, scenario, horizon, eopts,
                                          design.needs_table() ? &table : nullptr);
        write_csv_row(sink, design.name(), scenario, r);
      }
    }
    return kExitOk;
  }

  SweepOptions sopts;
  sopts.threads = common.threads;
  sopts.budget = &budget;
  const Scenario scenarios[] = {scenario};
  table_sweep(designs, scenarios, horizons, sink, sopts);
  return kExitOk;
}

int cmd_prior(std::optional<double> mean, std::optional<double> var, std::optional<double> alpha,
              std::optional<double> beta, std::ostream& out) {
  const bool from_moments = mean.has_value() || var.has_value();
  const bool from_params = alpha.has_value() || beta.has_value();
  if (from_moments == from_params)
    throw std::invalid_argument("give either --mean and --var, or --alpha and --beta");
  if (from_moments) {
    if (!mean.has_value() || !var.has_value())
      throw std::invalid_argument("--mean and --var go together");
    const auto [s, f] = beta_params_from_moments(*mean, *var);
    out << "s_pseudo=" << fmt17(s) << " f_pseudo=" << fmt17(f) << "\n";
  } else {
    if (!alpha.has_value() || !beta.has_value())
      throw std::invalid_argument("--alpha and --beta go together");
    const BetaMoments m = moments_from_beta(*alpha, *beta);
    out << "mean=" << fmt17(m.mean) << " var=" << fmt17(m.var) << "\n";
  }
  return kExitOk;
}

int cmd_recommend(const std::string& state_text, std::uint32_t horizon,
                  const std::string& design_name, const std::string& prior_text,
                  const CommonArgs& common, std::ostream& out) {
  const PhysicalState x = parse_state(state_text);
  const PriorSpec prior = parse_prior(prior_text);
  const std::uint32_t t = x.epoch();
  if (t >= horizon)
    throw std::invalid_argument("state already has " + std::to_string(t) +
                                " observations; horizon " + std::to_string(horizon) +
                                " leaves no allocation");
  const DesignSpec design = DesignSpec::parse(design_name);
  MemoryBudget budget(common.cap());
  Action action;
  if (design.kind == DesignKind::dp) {
    SolveOptions opts;
    opts.threads = common.threads;
    opts.budget = &budget;
    action = optimal_action(prior, x, t, horizon, opts);
  } else if (design.needs_table()) {
    throw std::invalid_argument("recommend supports dp only as a whole-design table rule");
  } else {
    action = action_of(design, prior, x, t, horizon);
  }
  out << "design=" << design.name() << " state=" << state_text << " t=" << t
      << " T=" << horizon << " action=";
  switch (action) {
    case Action::pure_c:
      out << "C";
      break;
    case Action::pure_d:
      out << "D";
      break;
    default:
      out << "MIXED p_C=0.5 p_D=0.5";
      break;
  }
  out << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& design_name, const ScenarioArgs& scenario_args,
                 std::uint32_t horizon, std::uint64_t runs, std::uint64_t seed,
                 const CommonArgs& common, std::ostream& out) {
  SimConfig cfg;
  cfg.design = DesignSpec::parse(design_name);
  cfg.scenario = scenario_args.scenario();
  cfg.horizon = horizon;
  cfg.runs = runs;
  cfg.seed = seed;
  cfg.threads = common.threads;
  MemoryBudget budget(common.cap());
  std::optional<ActionTable> table;
  if (cfg.design.needs_table()) {
    SolveOptions opts;
    opts.threads = common.threads;
    opts.budget = &budget;
    table = std::move(*solve_with_table(cfg.scenario.prior, horizon, opts).table);
    cfg.table = &*table;
  }
  const SimResult r = simulate(cfg);
  const auto [regret, benchmark] = regret_of(r.mean_successes, cfg.scenario, horizon);
  out << "design=" << cfg.design.name() << " T=" << horizon << " runs=" << runs
      << " seed=" << seed << " rng=" << r.rng << " mean_successes=" << fmt17(r.mean_successes)
      << " sd_successes=" << fmt17(r.sd_successes) << " se=" << fmt17(r.standard_error)
      << " mean_regret=" << fmt17(regret) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact solver and evaluator for the finite-horizon two-armed Bernoulli bandit"};
  app.name("banditfh");
  app.require_subcommand(1);

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "solve the Bayes-optimal design offline");
  std::uint32_t solve_horizon = 0;
  std::string solve_prior = "1,1,1,1";
  std::string solve_out;
  CommonArgs solve_common;
  solve_cmd->add_option("--horizon", solve_horizon, "trial size T")->required();
  solve_cmd->add_option("--prior", solve_prior, "prior pseudo-counts s_C,f_C,s_D,f_D");
  solve_cmd->add_option("--out", solve_out, "action-table output path")->required();
  solve_common.add_to(solve_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "exactly evaluate designs (CSV)");
  std::vector<std::string> eval_designs;
  ScenarioArgs eval_scenario;
  std::string eval_horizons;
  std::string eval_out;
  std::string eval_table;
  CommonArgs eval_common;
  eval_cmd->add_option("--design", eval_designs, "design name (repeatable)")
      ->required()
      ->delimiter(',');
  eval_scenario.add_to(eval_cmd);
  eval_cmd->add_option("--horizon", eval_horizons, "horizon value, list, or start:step:stop")
      ->required();
  eval_cmd->add_option("--out", eval_out, "CSV output path (default stdout)");
  eval_cmd->add_option("--table", eval_table, "pre-solved action table for dp designs");
  eval_common.add_to(eval_cmd);

  // table
  auto* table_cmd = app.add_subcommand("table", "reproduce a full design-comparison table");
  std::vector<std::string> table_designs = {"all"};
  ScenarioArgs table_scenario;
  std::string table_horizons = "60:60:1200";
  std::string table_out;
  CommonArgs table_common;
  table_cmd->add_option("--designs", table_designs, "design names or 'all'")->delimiter(',');
  table_scenario.add_to(table_cmd);
  table_cmd->add_option("--horizons", table_horizons, "horizon list or start:step:stop");
  table_cmd->add_option("--out", table_out, "CSV output path (default stdout)");
  table_common.add_to(table_cmd);

  // prior
  auto* prior_cmd = app.add_subcommand("prior", "convert Beta moments and parameters");
  std::optional<double> prior_mean, prior_var, prior_alpha, prior_beta;
  prior_cmd->add_option("--mean", prior_mean, "target mean");
  prior_cmd->add_option("--var", prior_var, "target variance");
  prior_cmd->add_option("--alpha", prior_alpha, "Beta success pseudo-count");
  prior_cmd->add_option("--beta", prior_beta, "Beta failure pseudo-count");

  // recommend
  auto* rec_cmd = app.add_subcommand("recommend", "next allocation for a state");
  std::string rec_state;
  std::uint32_t rec_horizon = 0;
  std::string rec_design = "dp";
  std::string rec_prior = "1,1,1,1";
  CommonArgs rec_common;
  rec_cmd->add_option("--state", rec_state, "observed counts s_C,f_C,s_D,f_D")->required();
  rec_cmd->add_option("--horizon", rec_horizon, "trial size T")->required();
  rec_cmd->add_option("--design", rec_design, "design name (default dp, online mode)");
  rec_cmd->add_option("--prior", rec_prior, "prior pseudo-counts");
  rec_common.add_to(rec_cmd);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo check of a design");
  std::string sim_design;
  ScenarioArgs sim_scenario;
  std::uint32_t sim_horizon = 0;
  std::uint64_t sim_runs = 100000;
  std::uint64_t sim_seed = 0;
  CommonArgs sim_common;
  sim_cmd->add_option("--design", sim_design, "design name")->required();
  sim_scenario.add_to(sim_cmd);
  sim_cmd->add_option("--horizon", sim_horizon, "trial size T")->required();
  sim_cmd->add_option("--runs", sim_runs, "number of replicates");
  sim_cmd->add_option("--seed", sim_seed, "base seed");
  sim_common.add_to(sim_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (solve_cmd->parsed()) {
      if (solve_horizon < 1) throw std::invalid_argument("horizon must be at least 1");
      return cmd_solve(solve_prior, solve_horizon, solve_out, solve_common, out);
    }
    if (eval_cmd->parsed())
      return cmd_eval(eval_designs, eval_scenario, eval_horizons, eval_out, eval_table,
                      eval_common, out);
    if (table_cmd->parsed()) {
      std::ofstream file;
      std::ostream& sink = open_output(table_out, file, out);
      const std::vector<DesignSpec> designs = parse_designs(table_designs);
      const Scenario scenario = table_scenario.scenario();
      const std::vector<std::uint32_t> horizons = parse_horizons(table_horizons);
      MemoryBudget budget(table_common.cap());
      SweepOptions sopts;
      sopts.threads = table_common.threads;
      sopts.budget = &budget;
      const Scenario scenarios[] = {scenario};
      table_sweep(designs, scenarios, horizons, sink, sopts);
      return kExitOk;
    }
    if (prior_cmd->parsed())
      return cmd_prior(prior_mean, prior_var, prior_alpha, prior_beta, out);
    if (rec_cmd->parsed()) {
      if (rec_horizon < 1) throw std::invalid_argument("horizon must be at least 1");
      return cmd_recommend(rec_state, rec_horizon, rec_design, rec_prior, rec_common, out);
    }
    if (sim_cmd->parsed()) {
      if (sim_horizon < 1) throw std::invalid_argument("horizon must be at least 1");
      return cmd_simulate(sim_design, sim_scenario, sim_horizon, sim_runs, sim_seed, sim_common,
                          out);
    }
    err << "error: no command given\n";
    return kExitUsage;
  } catch (const MemoryCapError& e) {
    err << "refused: " << e.what() << "\n";
    return kExitRefused;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRefused;
  } catch (const TableFormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::system_error& e) {  // covers filesystem errors too
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace banditfh
