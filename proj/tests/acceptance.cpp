// End-to-end acceptance suite: one PASS/FAIL line per criterion, exit status
// 1 if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coupconc/bounds.hpp"
#include "coupconc/chain.hpp"
#include "coupconc/coupling.hpp"
#include "coupconc/errors.hpp"
#include "coupconc/hoc.hpp"
#include "coupconc/verify.hpp"
#include "coupconc/zeta.hpp"
#include "oracles.hpp"

using namespace coupconc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::vector<double> nu_of(const TransitionKernel& k) { return stationary_solve(k).probs; }

TransitionKernel uniform_binary() {
  return TransitionKernel::from_rows({{{0, 0.5}, {1, 0.5}}, {{0, 0.5}, {1, 0.5}}});
}

// NaN-safe "converged or infinite" readout of a series field.
double field_or_inf(const PairField& f, double tol) {
  for (std::size_t i = 0; i < f.value.size(); ++i)
    if (f.remainder[i] > tol * std::max(1.0, std::abs(f.value[i])))
      return std::numeric_limits<double>::infinity();
  return 0.0;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " -> " : "") + fmt(v[i]);
  return s;
}

// ==== 1. coupling marginals ==================================================

Outcome coupling_marginals() {
  double worst = 0.0;
  std::size_t checked = 0;
  for (int i = 0; i < 10; ++i) {
    const std::size_t n = 2 + std::size_t(i) % 7;
    const auto k = oracle::to_kernel(oracle::random_stochastic(n, std::uint64_t(1000 + i), 0.5));
    for (const auto& q : {quantile_coupling(k), independent_coupling(k), coalesced_independent_coupling(k)}) {
      const auto e = marginal_errors(q);
      worst = std::max({worst, e.first, e.second});
      ++checked;
    }
  }
  return {worst <= 1e-10, std::to_string(checked) + " couplings, max marginal error " + fmt(worst)};
}

// ==== 2. constant-reset exact law ============================================

Outcome constant_reset_law() {
  double tail_err = 0.0, mean_err = 0.0;
  for (double qv : {0.2, 0.5, 0.8}) {
    const auto h = hoc::build_hoc(hoc::QSequence::case3(qv), 200);
    const auto tail = coupling_tail_exact(h.coupling, {1, 0}, 50);
    for (std::size_t t = 0; t <= 50; ++t)
      tail_err = std::max(tail_err, std::abs(tail.tail[t] - std::pow(1 - qv, double(t))));
    mean_err = std::max(mean_err, std::abs(expected_T_exact(h.coupling, {1, 0}) - 1.0 / qv));
  }
  return {tail_err <= 1e-12 && mean_err <= 1e-10,
          "max tail error " + fmt(tail_err) + ", max mean error " + fmt(mean_err)};
}

// ==== 3. product-bound domination ============================================

Outcome product_domination() {
  std::mt19937_64 gen(2024);
  std::size_t violations = 0, points = 0;
  double worst = 0.0;
  for (double alpha : {0.3, 0.5, 0.8}) {
    const auto q = hoc::QSequence::case1(alpha);
    const auto h = hoc::build_hoc(q, 200);
    std::uniform_int_distribution<std::size_t> pick(0, 99);
    for (int r = 0; r < 20; ++r) {
      std::size_t a = pick(gen), b = pick(gen);
      if (a == b) b = (a + 1) % 100;
      const std::size_t k = std::max(a, b), m = std::min(a, b);
      const auto tail = coupling_tail_exact(h.coupling, {k, m}, 100);
      for (std::size_t t = 1; t <= 100; ++t) {
        const double bound = hoc::tail_bound_coupes(q, k, t);
        worst = std::max(worst, tail.tail[t] - bound);
        if (tail.tail[t] > bound + 1e-13) ++violations;
        ++points;
      }
    }
  }
  return {violations == 0, std::to_string(points) + " points, " + std::to_string(violations) +
                               " violations, max excess " + fmt(worst)};
}

// ==== 4. stationary consistency ==============================================

Outcome stationary_consistency() {
  double diff = 0.0, resid = 0.0;
  const std::vector<std::pair<hoc::QSequence, std::size_t>> cases = {
      {hoc::QSequence::case1(0.5), 200}, {hoc::QSequence::case2(10.0), 200}, {hoc::QSequence::case3(0.5), 60}};
  for (const auto& [q, cap] : cases) {
    const auto h = hoc::build_hoc(q, cap);
    const auto st = stationary_solve(h.kernel);
    const auto ck = hoc::hoc_stationary_ck(q, cap);
    for (std::size_t i = 0; i < cap; ++i) diff = std::max(diff, std::abs(st.probs[i] - ck.nu[i]));
    resid = std::max({resid, stationary_residual(h.kernel, st.probs), stationary_residual(h.kernel, ck.nu)});
  }
  return {diff <= 1e-9 && resid <= 1e-10, "max entry gap " + fmt(diff) + ", max residual " + fmt(resid)};
}

// ==== 5. variance bound attained =============================================

Outcome variance_tightness() {
  const auto k = uniform_binary();
  const auto q = quantile_coupling(k);
  const std::vector<double> nu = {0.5, 0.5};
  const std::size_t n = 100;
  const double C = variance_constant(q, nu).value;
  const auto f = empirical_mean_profile(n, {0.0, 1.0});
  const double bound = C * lipschitz_l2(f.delta);
  const double var = exact_additive_variance(k, nu, std::vector<double>{0.0, 1.0}, n);
  return {std::abs(C - 0.25) <= 1e-12 && std::abs(bound - 2.5e-3) <= 1e-12 && std::abs(var - bound) <= 1e-12,
          "C = " + fmt(C) + ", bound = " + fmt(bound) + ", exact Var = " + fmt(var)};
}

// ==== 6. brute-force equivalence =============================================

Outcome brute_force_equivalence() {
  const double eps = 0.1, zeta = riemann_zeta(1.0 + eps).value;
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t n = 2; n <= 5; ++n) {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
      const auto m = oracle::random_stochastic(n, 500 + 10 * n + seed);
      const auto k = oracle::to_kernel(m);
      const auto nu = nu_of(k);
      const auto nu_ref = oracle::stationary_by_powers(m);
      for (const auto& q : {quantile_coupling(k), coalesced_independent_coupling(k)}) {
        const double v = variance_constant(q, nu).value;
        const double v_ref = oracle::variance_constant_fourfold(m, nu_ref, oracle::tau_hat_all_pairs(q));
        worst = std::max(worst, std::abs(v - v_ref) / std::max(1.0, std::abs(v_ref)));
        const auto law = oracle::coupling_time_law(q, 3000);
        const auto inner =
            oracle::expect_over_law(law, [eps](double t) { return std::pow(t + 1.0, 1.0 + eps / 2); });
        for (int p = 1; p <= 3; ++p) {
          const double c = moment_constant(q, nu, p, eps).value;
          const double c_ref = oracle::moment_constant_tuples(m, nu_ref, inner, p, zeta);
          worst = std::max(worst, std::abs(c - c_ref) / std::max(1.0, std::abs(c_ref)));
        }
        ++cases;
      }
    }
  }
  return {worst <= 1e-9, std::to_string(cases) + " chain/coupling cases, max relative gap " + fmt(worst)};
}

// ==== 7. Monte Carlo calibration =============================================

Outcome mc_calibration() {
  struct Case {
    std::string name;
    TransitionKernel kernel;
    CouplingKernel coupling;
    std::vector<double> g;
    std::size_t n;
  };
  const auto k3 = oracle::to_kernel(oracle::random_stochastic(3, 71));
  const auto k4 = oracle::to_kernel(oracle::random_stochastic(4, 72));
  const auto h = hoc::build_hoc(hoc::QSequence::case3(0.5), 8);
  std::vector<Case> cases = {
      {"3-state/quantile", k3, quantile_coupling(k3), {0.0, 1.0, 3.0}, 10},
      {"4-state/coalesced", k4, coalesced_independent_coupling(k4), {1.0, 0.0, 0.0, 2.0}, 8},
      {"hoc q=0.5", h.kernel, h.coupling, {1.0, 0, 0, 0, 0, 0, 0, 0}, 6},
  };
  const std::size_t replicas = 100000;
  double worst_z = 0.0;
  std::string worst_what;
  auto note = [&](double est, double se, double exact, const std::string& what) {
    const double z = se > 0 ? std::abs(est - exact) / se : (std::abs(est - exact) > 1e-12 ? 1e9 : 0.0);
    if (z > worst_z) {
      worst_z = z;
      worst_what = what;
    }
  };
  for (const auto& c : cases) {
    const auto nu = nu_of(c.kernel);
    const auto f = empirical_mean_profile(c.n, c.g);
    const auto ex = exact_deviation_stats(c.kernel, nu, f, c.n);
    const double et = expected_T_exact(c.coupling, {1, 0});
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      const auto s = simulate_coupling(c.coupling, {1, 0}, 5000, replicas, seed);
      double sum = 0.0, sq = 0.0;
      for (auto t : s.T) {
        sum += double(t);
        sq += double(t) * double(t);
      }
      const double mean = sum / double(replicas);
      const double se = std::sqrt((sq / double(replicas) - mean * mean) / double(replicas - 1));
      note(mean, se, et, c.name + " E[T]");
      const auto mc = mc_deviation_stats(c.kernel, nu, f, c.n, replicas, seed);
      note(mc.variance.value, mc.variance.se, ex.variance.value, c.name + " Var");
      note(mc.central_moments.at(4).value, mc.central_moments.at(4).se, ex.central_moments.at(4).value,
           c.name + " 4th moment");
    }
  }
  return {worst_z <= 4.0, "largest deviation " + fmt(worst_z) + " SE (" + worst_what + ")"};
}

// ==== 8. Gaussian MGF domination =============================================

Outcome gaussian_mgf() {
  const double eps = 1.0;
  const auto h = hoc::build_hoc(hoc::QSequence::case3(0.5), 80);
  const double c_eps = gaussian_constant(h.coupling, eps).value;
  const double pi2 = M_PI * M_PI;
  const double oracle_c = pi2 / 6.0 * 36.0;
  const std::size_t n = 200;
  std::vector<double> g(80, 0.0);
  g[0] = 1.0;
  const auto f = empirical_mean_profile(n, g);
  StatsOptions opts;
  opts.lambda_grid = {-20, -5, -1, 1, 5, 20};
  const auto s = mc_deviation_stats(h.kernel, nu_of(h.kernel), f, n, 20000, 8, opts);
  const auto verdicts = check_gaussian_mgf(s, c_eps, f.delta);
  std::size_t passed = 0;
  double max_slack = 0.0;
  for (const auto& v : verdicts) {
    passed += v.kind == VerdictKind::Pass;
    max_slack = std::max(max_slack, v.slack_ratio);
  }
  const bool const_ok = std::abs(c_eps - oracle_c) <= 1e-6 * oracle_c;
  return {const_ok && passed == verdicts.size() && verdicts.size() == 6,
          "C_eps = " + fmt(c_eps) + " (oracle " + fmt(oracle_c) + "), " + std::to_string(passed) + "/" +
              std::to_string(verdicts.size()) + " lambdas pass, max log-MGF/bound " + fmt(max_slack)};
}

// ==== 9-10. cap-doubling studies =============================================

struct CapValues {
  std::vector<std::size_t> caps;
  std::map<int, std::vector<double>> moment;  // p -> values
  std::vector<double> gaussian;
};

CapValues cap_values(const hoc::QSequence& q, double eps, int max_p, bool with_gaussian,
                     const std::vector<std::size_t>& caps) {
  CapValues out;
  out.caps = caps;
  TailOptions opts;
  for (auto cap : caps) {
    const auto h = hoc::build_hoc(q, cap);
    const auto nu = nu_of(h.kernel);
    // One field per cap, shared by every order p.
    const auto inner = all_pairs_T_moment(h.coupling, 1.0 + eps / 2, 1.0, opts);
    const double flag = field_or_inf(inner, opts.tol);
    for (int p = 1; p <= max_p; ++p)
      out.moment[p].push_back(flag + moment_constant_sum(h.kernel, nu, inner, p, eps));
    if (with_gaussian) {
      try {
        out.gaussian.push_back(gaussian_constant(h.coupling, eps, MetricRoute::Discrete, opts).value);
      } catch (const DivergenceFlag&) {
        out.gaussian.push_back(std::numeric_limits<double>::infinity());
      }
    }
  }
  return out;
}

Outcome heavy_reset_divergence() {
  const std::vector<std::size_t> caps = {64, 128, 256, 512};
  const auto v = cap_values(hoc::QSequence::case1(0.5), 0.1, 4, true, caps);
  const auto g = classify_growth(caps, v.gaussian);
  bool moments_stable = true;
  std::string detail = "C_eps " + join(v.gaussian) + (g.divergent ? " (divergent)" : " (not divergent)");
  for (int p = 1; p <= 4; ++p) {
    const auto s = classify_growth(caps, v.moment.at(p));
    moments_stable = moments_stable && s.stable;
    detail += "; C_" + std::to_string(p) + (s.stable ? " stable" : " NOT stable") + " at " + fmt(v.moment.at(p).back());
  }
  return {g.divergent && moments_stable, detail};
}

Outcome polynomial_reset_threshold() {
  const std::vector<std::size_t> caps = {64, 128, 256, 512};
  const double gamma = 10.0, eps = 1.0;
  const auto v = cap_values(hoc::QSequence::case2(gamma), eps, 3, false, caps);
  const int threshold = hoc::case2_moment_order_threshold(gamma, eps);
  bool ok = threshold == 2;
  std::string detail = "order threshold " + std::to_string(threshold);
  for (int p = 1; p <= 3; ++p) {
    const auto s = classify_growth(caps, v.moment.at(p));
    const bool want_stable = p <= 2;
    ok = ok && (want_stable ? s.stable : (s.divergent && !s.stable));
    detail += "; C_" + std::to_string(p) + " " + join(v.moment.at(p)) +
              (s.stable ? " (stable)" : s.divergent ? " (divergent)" : " (unsettled)");
  }
  return {ok, detail};
}

// ==== 11. Hamming neighborhoods ==============================================

Outcome hamming_neighborhoods() {
  const auto k = uniform_binary();
  const std::vector<double> nu = {0.5, 0.5};
  // p = 1 is covered by the variance inequality, so its constant is used.
  const double C = variance_constant(quantile_coupling(k), nu).value;
  const HammingSet a{"first coordinate 0", 10, [](PathView x) { return x[0] == 0; }};
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(0.05 * i);
  const auto t = hamming_check(k, nu, a, 1, C, grid);
  std::size_t valid = 0;
  for (const auto& r : t.rows) valid += r.valid;
  return {t.violations == 0 && valid > 0,
          std::to_string(valid) + " valid eps (threshold " + fmt(t.threshold) + "), " +
              std::to_string(t.violations) + " violations"};
}

// ==== 12. CLI determinism ====================================================

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

Outcome cli_determinism() {
  const auto root = fs::temp_directory_path() / "coupconc_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto hoc_ini = root / "hoc.ini", bin_ini = root / "binary.ini";
  std::ofstream(hoc_ini) << "[chain]\nfamily = hoc_case1\nparameter = 0.5\ncap = 40\n"
                            "[verify]\nn = 60\nreplicas = 3000\nlambda_grid = -4, 4\n[run]\nseed = 21\n";
  std::ofstream(bin_ini) << "[chain]\nfamily = matrix\nmatrix = 0.6 0.4; 0.3 0.7\n"
                            "[hamming]\nn = 10\neps_grid = 0.3, 0.5, 0.8\n[run]\nseed = 21\n";
  const std::vector<std::pair<std::string, fs::path>> runs = {
      {"stationary", hoc_ini}, {"coupling", hoc_ini}, {"constants", hoc_ini},
      {"verify", hoc_ini},     {"hamming", bin_ini}};
  const std::vector<std::string> variants = {"", "", " --set run.threads=4"};
  std::vector<std::map<std::string, std::string>> outputs;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const auto out = root / ("run" + std::to_string(v));
    for (const auto& [cmd, ini] : runs) {
      const std::string line = std::string(COUPCONC_CLI_PATH) + " " + cmd + " --config " + ini.string() +
                               " --out " + out.string() + variants[v] + " >/dev/null 2>&1";
      const int status = std::system(line.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) == 1)
        return {false, cmd + " exited with an error"};
    }
    outputs.push_back(read_dir(out));
  }
  const bool same = outputs[0] == outputs[1] && outputs[0] == outputs[2];
  return {same && outputs[0].size() >= 10,
          std::to_string(outputs[0].size()) + " files, " + (same ? "byte-identical" : "DIFFER") +
              " across repeats and 1 vs 4 threads"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"coupling marginals", coupling_marginals},
      {"constant-reset exact law", constant_reset_law},
      {"product-bound domination", product_domination},
      {"stationary consistency", stationary_consistency},
      {"variance bound attained", variance_tightness},
      {"brute-force constant equivalence", brute_force_equivalence},
      {"Monte Carlo calibration", mc_calibration},
      {"Gaussian MGF domination", gaussian_mgf},
      {"heavy-reset divergence detection", heavy_reset_divergence},
      {"polynomial-reset order threshold", polynomial_reset_threshold},
      {"Hamming neighborhood bound", hamming_neighborhoods},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("%s [%02zu] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
