#include "coupconc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>

#include "coupconc/bounds.hpp"
#include "coupconc/chain.hpp"
#include "coupconc/coupling.hpp"
#include "coupconc/errors.hpp"
#include "coupconc/hoc.hpp"
#include "coupconc/report.hpp"
#include "coupconc/verify.hpp"

namespace coupconc {

namespace {

using json = nlohmann::ordered_json;

// Non-finite values become strings so documents stay valid JSON.
json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

// =============================================================================
// Model assembly
// =============================================================================

struct Model {
  TransitionKernel kernel;
  CouplingKernel coupling;
  StationaryDistribution stationary;
  std::optional<hoc::QSequence> q;
  double tail_mass = 0.0;
};

std::optional<hoc::QSequence> q_sequence(const ExperimentConfig& x) {
  if (x.family == "hoc_case1") return hoc::QSequence::case1(x.parameter, x.prefix);
  if (x.family == "hoc_case2") return hoc::QSequence::case2(x.parameter, x.prefix);
  if (x.family == "hoc_case3") return hoc::QSequence::case3(x.parameter, x.prefix);
  if (x.family == "hoc_custom") return hoc::QSequence::custom(x.prefix);
  return std::nullopt;
}

Model build_model(const ExperimentConfig& x) {
  Model m;
  m.q = q_sequence(x);
  std::optional<CouplingKernel> shared;
  if (m.q) {
    auto chain = hoc::build_hoc(*m.q, x.cap, x.mass_tol);
    m.kernel = chain.kernel;
    m.tail_mass = chain.tail_mass;
    shared = std::move(chain.coupling);
  } else {
    DenseMatrix d(x.matrix.size(), x.matrix.size());
    for (std::size_t i = 0; i < x.matrix.size(); ++i)
      for (std::size_t j = 0; j < x.matrix.size(); ++j)
        d(Eigen::Index(i), Eigen::Index(j)) = x.matrix[i][j];
    m.kernel = validate_kernel(d);
  }
  if (x.coupling == "independent")
    m.coupling = independent_coupling(m.kernel);
  else if (x.coupling == "coalesced_independent")
    m.coupling = coalesced_independent_coupling(m.kernel);
  else if (x.coupling == "quantile" || !shared)
    m.coupling = quantile_coupling(m.kernel);
  else
    m.coupling = std::move(*shared);
  m.stationary = stationary_solve(m.kernel);
  return m;
}

LipschitzProfile functional(const ExperimentConfig& x, const Model& m, std::size_t n) {
  const std::size_t s = x.observable_state;
  if (x.functional != "constant" && s >= m.kernel.size())
    throw ConfigError(0, "verify.observable_state", "state outside the chain");
  if (x.functional == "empirical_mean") {
    std::vector<double> g(m.kernel.size(), 0.0);
    g[s] = 1.0;
    return empirical_mean_profile(n, std::move(g), m.kernel.metric());
  }
  if (x.functional == "hamming_to_path") return hamming_to_path_profile(std::vector<std::size_t>(n, s));
  if (x.functional == "site_indicator") return site_indicator_profile(n, s);
  return constant_profile(n, 0.0);
}

TailOptions tail_options(const ExperimentConfig& x) {
  TailOptions o;
  o.horizon = x.min_horizon;
  o.max_horizon = x.max_horizon;
  o.tol = x.tol;
  o.threads = x.threads;
  return o;
}

ConstantsRequest constants_request(const ExperimentConfig& x) {
  ConstantsRequest r;
  r.epsilon = x.epsilon;
  r.orders = x.orders;
  r.tail = tail_options(x);
  if (x.worst_pair) r.worst_pair = StatePair{x.worst_pair->first, x.worst_pair->second};
  return r;
}

json constants_json(const BoundConstants& c) {
  json j;
  j["epsilon"] = c.epsilon;
  j["C_var"] = num(c.C_var);
  json cp = json::object();
  for (const auto& [p, v] : c.C_p) cp[std::to_string(p)] = num(v);
  j["C_p"] = cp;
  j["C_eps"] = c.C_eps ? num(*c.C_eps) : json(nullptr);
  j["C_monotone"] = c.C_monotone ? num(*c.C_monotone) : json(nullptr);
  json div = json::object();
  for (const auto& [k, g] : c.divergent) div[k] = num(g);
  j["divergent"] = div;
  j["horizon"] = c.horizon;
  j["remainder"] = num(c.remainder);
  return j;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::string out_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// =============================================================================
// Subcommands
// =============================================================================

CommandResult cmd_stationary(const ExperimentConfig& x, const Model& m, const Manifest& man,
                             const std::string& dir) {
  std::optional<hoc::StationaryProducts> closed;
  if (m.q) closed = hoc::hoc_stationary_ck(*m.q, x.cap, x.mass_tol);

  CsvTable table({"state", "stationary", "closed_form"});
  double gap = 0.0;
  for (std::size_t s = 0; s < m.kernel.size(); ++s) {
    const double v = m.stationary.probs[s];
    std::string cf;
    if (closed) {
      cf = format_double(closed->nu[s]);
      gap = std::max(gap, std::abs(closed->nu[s] - v));
    }
    table.add_row({std::to_string(s), format_double(v), cf});
  }
  json body;
  body["states"] = m.kernel.size();
  body["method"] = m.stationary.method;
  body["residual"] = num(m.stationary.residual);
  body["tail_mass"] = num(m.tail_mass);
  if (closed) {
    body["pi0"] = num(closed->pi0);
    body["closed_form_max_gap"] = num(gap);
  }
  body["stationary"] = m.stationary.probs;

  CommandResult r;
  r.files = {out_path(dir, "stationary.json"), out_path(dir, "stationary.csv")};
  write_text(r.files[0], render_json(std::move(body), man));
  write_text(r.files[1], table.render(man));
  return r;
}

CommandResult cmd_coupling(const ExperimentConfig& x, const Model& m, const Manifest& man,
                           const std::string& dir) {
  const StatePair start{x.start_x, x.start_y};
  if (start.x >= m.kernel.size() || start.y >= m.kernel.size())
    throw ConfigError(0, "coupling.start", "state outside the chain");
  const auto tail = coupling_tail_exact(m.coupling, start, x.horizon);
  const double mean = expected_T_exact(m.coupling, start);
  const auto opts = tail_options(x);
  const auto m1 = moment_T(m.coupling, start, 1.0 + x.epsilon, 0.0, opts);
  const auto m2 = fractional_moment_T(m.coupling, start, 1.0 + x.epsilon / 2.0, opts);

  CsvTable table({"t", "survival", "product_bound"});
  for (std::size_t t = 0; t <= x.horizon; ++t) {
    std::string bound;
    if (m.q) {
      try {
        bound = format_double(hoc::tail_bound_coupes(*m.q, std::max(start.x, start.y), t));
      } catch (const IndexBeyondCap&) {
      }
    }
    table.add_row({std::to_string(t), format_double(tail.tail[t]), bound});
  }
  json body;
  body["start"] = {start.x, start.y};
  body["coalescing"] = m.coupling.coalescing();
  body["mean_T"] = num(mean);
  body["moment_T_1_plus_eps"] = {{"value", num(m1.value)}, {"remainder", num(m1.remainder)}};
  body["moment_T_plus_1_half_eps"] = {{"value", num(m2.value)}, {"remainder", num(m2.remainder)}};
  body["tail_remainder_bound"] = num(tail.tail_remainder_bound);
  const auto marg = marginal_errors(m.coupling);
  body["marginal_errors"] = {num(marg.first), num(marg.second)};

  CommandResult r;
  r.files = {out_path(dir, "coupling.json"), out_path(dir, "coupling.csv")};
  write_text(r.files[0], render_json(std::move(body), man));
  write_text(r.files[1], table.render(man));
  return r;
}

CommandResult cmd_constants(const ExperimentConfig& x, const Model& m, const Manifest& man,
                            const std::string& dir) {
  const auto c = compute_constants(m.coupling, m.stationary.probs, constants_request(x));
  const auto f = functional(x, m, x.n);
  const auto report = bound_report(c, f.delta, x.t_grid);

  CsvTable table({"t", "chebyshev", "polynomial", "best_p", "gaussian", "gaussian_chernoff",
                  "chebyshev_vacuous", "polynomial_vacuous", "gaussian_vacuous"});
  for (const auto& row : report.rows)
    table.add_row({format_double(row.t), format_double(row.chebyshev), opt(row.polynomial),
                   std::to_string(row.best_p), opt(row.gaussian), opt(row.gaussian_chernoff),
                   row.chebyshev_vacuous ? "1" : "0",
                   row.polynomial_vacuous ? "1" : "0", row.gaussian_vacuous ? "1" : "0"});
  json body;
  body["constants"] = constants_json(c);
  if (m.q && m.q->family() == hoc::Family::Case3)
    body["case3_C"] = num(hoc::case3_gaussian_C(m.q->parameter()));
  body["functional"] = f.name;
  body["n"] = x.n;
  body["lipschitz_l2"] = num(report.lipschitz_l2);

  CommandResult r;
  r.files = {out_path(dir, "constants.json"), out_path(dir, "bounds.csv")};
  write_text(r.files[0], render_json(std::move(body), man));
  write_text(r.files[1], table.render(man));
  return r;
}

CommandResult cmd_verify(const ExperimentConfig& x, const Model& m, const Manifest& man,
                         const std::string& dir) {
  const auto c = compute_constants(m.coupling, m.stationary.probs, constants_request(x));
  const auto f = functional(x, m, x.n);
  StatsOptions so;
  so.max_order = 2 * std::max(1, *std::max_element(x.orders.begin(), x.orders.end()));
  so.lambda_grid = x.lambda_grid;
  so.t_grid = x.t_grid;
  so.threads = x.threads;
  const auto stats = mc_deviation_stats(m.kernel, m.stationary.probs, f, x.n, x.replicas, x.seed, so);

  std::vector<Verdict> verdicts;
  verdicts.push_back(check_variance_bound(stats, c.C_var, f.delta));
  for (int p : x.orders) {
    const auto it = c.C_p.find(p);
    const double cp = it == c.C_p.end() ? std::numeric_limits<double>::infinity() : it->second;
    verdicts.push_back(check_moment_bound(stats, cp, f.delta, p));
    for (auto& v : check_poly_tail(stats, cp, f.delta, p)) verdicts.push_back(std::move(v));
  }
  const double ce = c.C_eps ? *c.C_eps : std::numeric_limits<double>::infinity();
  for (auto& v : check_gaussian_mgf(stats, ce, f.delta)) verdicts.push_back(std::move(v));
  for (auto& v : check_gaussian_tail(stats, ce, f.delta)) verdicts.push_back(std::move(v));

  CsvTable table({"check", "at", "estimate", "se", "bound", "slack_ratio", "verdict"});
  bool failed = false;
  for (const auto& v : verdicts) {
    failed = failed || v.kind == VerdictKind::Fail;
    table.add_row({v.check, format_double(v.at), format_double(v.estimate), format_double(v.se),
                   format_double(v.bound), format_double(v.slack_ratio), verdict_name(v.kind)});
  }
  const auto report = bound_report(c, f.delta, x.t_grid);
  CsvTable tails({"t", "empirical_tail", "chebyshev", "polynomial", "gaussian", "gaussian_chernoff"});
  for (const auto& row : report.rows)
    tails.add_row({format_double(row.t), format_double(stats.tail.at(row.t).value),
                   format_double(row.chebyshev), opt(row.polynomial), opt(row.gaussian),
                   opt(row.gaussian_chernoff)});

  json body;
  body["constants"] = constants_json(c);
  body["functional"] = f.name;
  body["n"] = x.n;
  body["replicas"] = x.replicas;
  body["mean"] = {num(stats.mean.value), num(stats.mean.se)};
  body["variance"] = {num(stats.variance.value), num(stats.variance.se)};
  const auto worst = worst_of(verdicts);
  body["overall"] = verdict_name(worst.kind);

  CommandResult r;
  r.exit_code = failed ? kExitFail : kExitOk;
  r.files = {out_path(dir, "verify.json"), out_path(dir, "verdicts.csv"), out_path(dir, "tails.csv")};
  write_text(r.files[0], render_json(std::move(body), man));
  write_text(r.files[1], table.render(man));
  write_text(r.files[2], tails.render(man));
  return r;
}

CommandResult cmd_hamming(const ExperimentConfig& x, const Model& m, const Manifest& man,
                          const std::string& dir) {
  const auto opts = tail_options(x);
  const double cp = x.hamming_constant == "variance"
                        ? variance_constant(m.coupling, m.stationary.probs, opts).value
                        : moment_constant(m.coupling, m.stationary.probs, x.hamming_p, x.epsilon,
                                          MetricRoute::Discrete, opts)
                              .value;
  HammingSet A;
  A.n = x.hamming_n;
  A.name = "x_" + std::to_string(x.set_coordinate) + "=" + std::to_string(x.set_state);
  A.contains = [c = x.set_coordinate, s = x.set_state](PathView p) { return p[c] == s; };
  const auto table = hamming_check(m.kernel, m.stationary.probs, A, x.hamming_p, cp, x.eps_grid);

  CsvTable csv({"eps", "valid", "probability", "lower_bound", "holds"});
  for (const auto& row : table.rows)
    csv.add_row({format_double(row.eps), row.valid ? "1" : "0", format_double(row.probability),
                 row.valid ? format_double(row.lower_bound) : "", row.valid ? (row.holds ? "1" : "0") : ""});
  json body;
  body["set"] = A.name;
  body["n"] = table.n;
  body["p"] = table.p;
  body["constant"] = x.hamming_constant;
  body["C_p"] = num(table.C_p);
  body["prob_A"] = num(table.prob_A);
  body["threshold"] = num(table.threshold);
  body["expected_distance"] = num(table.expected_distance);
  body["expected_distance_bound"] = num(table.expected_distance_bound);
  body["violations"] = table.violations;

  CommandResult r;
  r.exit_code = table.violations ? kExitFail : kExitOk;
  r.files = {out_path(dir, "hamming.json"), out_path(dir, "hamming.csv")};
  write_text(r.files[0], render_json(std::move(body), man));
  write_text(r.files[1], csv.render(man));
  return r;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"stationary", "coupling", "constants", "verify", "hamming"};
  return names;
}

CommandResult run_command(const std::string& command, const Config& config, const std::string& out_dir) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end())
    throw PreconditionError("unknown command '" + command + "'");
  const auto x = to_experiment(config);
  std::filesystem::create_directories(out_dir);
  const auto man = make_manifest(command, config, x.seed);
  const auto m = build_model(x);
  if (command == "stationary") return cmd_stationary(x, m, man, out_dir);
  if (command == "coupling") return cmd_coupling(x, m, man, out_dir);
  if (command == "constants") return cmd_constants(x, m, man, out_dir);
  if (command == "verify") return cmd_verify(x, m, man, out_dir);
  return cmd_hamming(x, m, man, out_dir);
}

}  // namespace coupconc
