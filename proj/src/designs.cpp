#include "banditfh/designs.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "banditfh/action_table.hpp"
#include "banditfh/errors.hpp"

namespace banditfh {

namespace {

Action pick(double value_c, double value_d) {
  if (value_c > value_d) return Action::pure_c;
  if (value_d > value_c) return Action::pure_d;
  return Action::mixed;
}

std::string format_coeff(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

StageSpec parse_stage(std::string_view name) {
  const DesignSpec spec = DesignSpec::parse(name);
  if (spec.kind == DesignKind::combo)
    throw std::invalid_argument("combination designs nest at most one level");
  return {spec.kind, spec.ucb_alpha};
}

std::string stage_name(const StageSpec& st) {
  DesignSpec spec;
  spec.kind = st.kind;
  spec.ucb_alpha = st.ucb_alpha;
  return spec.name();
}

}  // namespace

ActionProb to_prob(Action a) {
  switch (a) {
    case Action::pure_c:
      return kPureC;
    case Action::pure_d:
      return kPureD;
    case Action::mixed:
      return kMixed;
    case Action::none:
      break;
  }
  throw std::invalid_argument("no action probability for the terminal code");
}

DesignSpec DesignSpec::parse(std::string_view name) {
  auto plain = [](DesignKind k) {
    DesignSpec s;
    s.kind = k;
    return s;
  };
  if (name == "era") return plain(DesignKind::era);
  if (name == "dp") return plain(DesignKind::dp);
  if (name == "bm") return plain(DesignKind::bm);
  if (name == "fm") return plain(DesignKind::fm);
  if (name == "bkg") return plain(DesignKind::bkg);
  if (name == "blff") return plain(DesignKind::blff);
  if (name == "flff") return plain(DesignKind::flff);
  if (name == "bmsf") return plain(DesignKind::bmsf);
  if (name == "bgdf") return plain(DesignKind::bgdf);
  if (name.substr(0, 4) == "ucb:") {
    DesignSpec s;
    s.kind = DesignKind::ucb;
    try {
      s.ucb_alpha = std::stod(std::string(name.substr(4)));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad ucb coefficient in '" + std::string(name) + "'");
    }
    if (!(s.ucb_alpha > 0.0)) throw std::invalid_argument("ucb coefficient must be > 0");
    return s;
  }
  if (name.substr(0, 6) == "combo:") {
    const std::string_view body = name.substr(6);
    const auto coeff_pos = body.rfind(':');
    const auto plus_pos = body.find('+');
    if (coeff_pos == std::string_view::npos || plus_pos == std::string_view::npos ||
        plus_pos > coeff_pos)
      throw std::invalid_argument("combination syntax is combo:<first>+<second>:<coeff>");
    DesignSpec s;
    s.kind = DesignKind::combo;
    s.first = parse_stage(body.substr(0, plus_pos));
    s.second = parse_stage(body.substr(plus_pos + 1, coeff_pos - plus_pos - 1));
    try {
      s.stage_coeff = std::stod(std::string(body.substr(coeff_pos + 1)));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad stage coefficient in '" + std::string(name) + "'");
    }
    if (!(s.stage_coeff > 0.0)) throw std::invalid_argument("stage coefficient must be > 0");
    return s;
  }
  throw std::invalid_argument("unknown design name '" + std::string(name) + "'");
}

std::string DesignSpec::name() const {
  switch (kind) {
    case DesignKind::era:
      return "era";
    case DesignKind::dp:
      return "dp";
    case DesignKind::bm:
      return "bm";
    case DesignKind::fm:
      return "fm";
    case DesignKind::bkg:
      return "bkg";
    case DesignKind::blff:
      return "blff";
    case DesignKind::flff:
      return "flff";
    case DesignKind::bmsf:
      return "bmsf";
    case DesignKind::bgdf:
      return "bgdf";
    case DesignKind::ucb:
      return "ucb:" + format_coeff(ucb_alpha);
    case DesignKind::combo:
      return "combo:" + stage_name(first) + "+" + stage_name(second) + ":" +
             format_coeff(stage_coeff);
  }
  throw std::logic_error("unreachable design kind");
}

bool DesignSpec::needs_table() const {
  if (kind == DesignKind::dp) return true;
  if (kind == DesignKind::combo)
    return first.kind == DesignKind::dp || second.kind == DesignKind::dp;
  return false;
}

Action era_action() { return Action::mixed; }

Action bm_action(const PriorSpec& prior, const PhysicalState& x) {
  const ArmPosteriors post = posterior(prior, x);
  return pick(predictive_success(post.c), predictive_success(post.d));
}

Action fm_action(const PhysicalState& x, std::uint32_t t) {
  if (t == 0) return Action::pure_c;
  if (t == 1) return Action::pure_d;
  const std::uint32_t n_c = x.s_c + x.f_c;
  const std::uint32_t n_d = x.s_d + x.f_d;
  // An unobserved arm scores 0; after the two forced periods such states are
  // unreachable under the design itself, but the lattice still contains them.
  const double mean_c = n_c ? double(x.s_c) / n_c : 0.0;
  const double mean_d = n_d ? double(x.s_d) / n_d : 0.0;
  return pick(mean_c, mean_d);
}

double ucb_index(double alpha, std::uint32_t s, std::uint32_t f, std::uint32_t t) {
  if (!(alpha > 0.0)) throw std::invalid_argument("ucb coefficient must be > 0");
  const std::uint32_t n = s + f;
  if (n == 0) throw std::domain_error("ucb index undefined for an unobserved arm");
  return double(s) / n + std::sqrt(alpha * std::log(double(t) + 1.0) / n);
}

Action ucb_action(double alpha, const PhysicalState& x, std::uint32_t t) {
  if (t == 0) return Action::pure_c;
  if (t == 1) return Action::pure_d;
  const std::uint32_t n_c = x.s_c + x.f_c;
  const std::uint32_t n_d = x.s_d + x.f_d;
  // Unobserved arms carry an infinite exploration bonus.
  if (n_c == 0 && n_d == 0) return Action::mixed;
  if (n_c == 0) return Action::pure_c;
  if (n_d == 0) return Action::pure_d;
  return pick(ucb_index(alpha, x.s_c, x.f_c, t), ucb_index(alpha, x.s_d, x.f_d, t));
}

double bkg_score(const PosteriorCounts& own, const PosteriorCounts& other, std::uint32_t t,
                 std::uint32_t horizon) {
  if (t >= horizon) throw std::domain_error("knowledge-gradient score needs t < horizon");
  const double mu = predictive_success(own);
  const double mu_other = predictive_success(other);
  const double denom = own.s + own.f + 1.0;
  const double mu_up = (own.s + 1.0) / denom;  // belief after one more success
  const double mu_down = own.s / denom;        // belief after one more failure
  const double steps = double(horizon - t) - 1.0;
  double keep;
  if (mu_other >= mu_up) {
    keep = mu_other;
  } else if (mu_other >= mu_down) {
    keep = (1.0 - mu) * mu_other + mu * mu_up;
  } else {
    keep = (own.s + mu) / denom;  // belief after observing its own mean
  }
  return mu + steps * keep;
}

Action bkg_action(const PriorSpec& prior, const PhysicalState& x, std::uint32_t t,
                  std::uint32_t horizon) {
  const ArmPosteriors post = posterior(prior, x);
  return pick(bkg_score(post.c, post.d, t, horizon), bkg_score(post.d, post.c, t, horizon));
}

namespace {

Action least_failures_first(double s_c, double f_c, double s_d, double f_d) {
  if (f_c < f_d) return Action::pure_c;
  if (f_d < f_c) return Action::pure_d;
  return pick(s_c, s_d);
}

}  // namespace

Action blff_action(const PriorSpec& prior, const PhysicalState& x) {
  const ArmPosteriors post = posterior(prior, x);
  return least_failures_first(post.c.s, post.c.f, post.d.s, post.d.f);
}

Action flff_action(const PhysicalState& x) {
  return least_failures_first(x.s_c, x.f_c, x.s_d, x.f_d);
}

Action bmsf_action(const PriorSpec& prior, const PhysicalState& x) {
  const ArmPosteriors post = posterior(prior, x);
  // Most successes first; a tie goes to the arm with fewer failures (the
  // higher posterior mean), double ties mix.
  if (post.c.s != post.d.s) return post.c.s > post.d.s ? Action::pure_c : Action::pure_d;
  return pick(-post.c.f, -post.d.f);
}

Action bgdf_action(const PriorSpec& prior, const PhysicalState& x) {
  const ArmPosteriors post = posterior(prior, x);
  const double diff_c = post.c.s - post.c.f;
  const double diff_d = post.d.s - post.d.f;
  // Greatest difference first; a tie goes to the arm with more successes,
  // double ties mix.
  if (diff_c != diff_d) return diff_c > diff_d ? Action::pure_c : Action::pure_d;
  return pick(post.c.s, post.d.s);
}

std::uint32_t combo_stage_length(double stage_coeff, std::uint32_t horizon) {
  if (!(stage_coeff > 0.0)) throw std::invalid_argument("stage coefficient must be > 0");
  return static_cast<std::uint32_t>(std::floor(std::sqrt(stage_coeff * double(horizon)) + 0.5));
}

StageSpec effective_stage(const DesignSpec& spec, std::uint32_t t, std::uint32_t horizon) {
  if (spec.kind != DesignKind::combo) return {spec.kind, spec.ucb_alpha};
  return t < combo_stage_length(spec.stage_coeff, horizon) ? spec.first : spec.second;
}

Action action_of(const DesignSpec& spec, const PriorSpec& prior, const PhysicalState& x,
                 std::uint32_t t, std::uint32_t horizon, const ActionTable* table) {
  const StageSpec stage = effective_stage(spec, t, horizon);
  switch (stage.kind) {
    case DesignKind::era:
      return era_action();
    case DesignKind::bm:
      return bm_action(prior, x);
    case DesignKind::fm:
      return fm_action(x, t);
    case DesignKind::ucb:
      return ucb_action(stage.ucb_alpha, x, t);
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
    case DesignKind::dp: {
      if (table == nullptr) throw ConfigError("dp design requires a solved action table");
      if (table->horizon() != horizon)
        throw ConfigError("action table horizon does not match the request");
      if (!(table->prior() == prior))
        throw ConfigError("action table prior does not match the request");
      const Action a = table->code_at(x);
      if (a == Action::none) throw TableFormatError("no action stored for a non-terminal state");
      return a;
    }
    case DesignKind::combo:
      break;
  }
  throw std::logic_error("unreachable design dispatch");
}

}  // namespace banditfh
