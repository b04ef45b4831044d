#include "coupconc/verify.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "coupconc/bounds.hpp"
#include "coupconc/errors.hpp"
#include "coupconc/parallel.hpp"
#include "coupconc/rng.hpp"

namespace coupconc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kEnumerationLimit = std::size_t{1} << 22;

std::size_t checked_power(std::size_t base, std::size_t exp) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (total > kEnumerationLimit / std::max<std::size_t>(base, 1))
      throw PreconditionError("path space too large to enumerate");
    total *= base;
  }
  return total;
}

void require_length(const LipschitzProfile& f, std::size_t n) {
  if (f.length() != n) throw PreconditionError("functional '" + f.name + "' expects paths of length " +
                                               std::to_string(f.length()));
}

}  // namespace

// =============================================================================
// Lipschitz functionals
// =============================================================================

LipschitzProfile empirical_mean_profile(std::size_t n, std::vector<double> g, const Metric& metric) {
  if (n == 0 || g.empty()) throw PreconditionError("empirical mean needs n >= 1 and an observable");
  double lip = 0.0;
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = a + 1; b < g.size(); ++b)
      lip = std::max(lip, std::abs(g[a] - g[b]) / metric(a, b));
  LipschitzProfile f;
  f.name = "empirical_mean";
  f.delta.assign(n, lip / double(n));
  f.evaluate = [g = std::move(g)](PathView x) {
    double s = 0.0;
    for (auto v : x) s += g.at(v);
    return s / double(x.size());
  };
  return f;
}

LipschitzProfile hamming_to_path_profile(std::vector<std::size_t> reference) {
  const std::size_t n = reference.size();
  if (n == 0) throw PreconditionError("reference path is empty");
  LipschitzProfile f;
  f.name = "hamming_to_path";
  f.delta.assign(n, 1.0 / double(n));
  f.evaluate = [ref = std::move(reference)](PathView x) {
    std::size_t diff = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) diff += x[i] != ref[i];
    return double(diff) / double(ref.size());
  };
  return f;
}

LipschitzProfile hamming_to_set_profile(std::size_t n, std::vector<std::vector<std::size_t>> members) {
  if (members.empty()) throw PreconditionError("set is empty");
  for (const auto& m : members)
    if (m.size() != n) throw PreconditionError("set member has the wrong length");
  LipschitzProfile f;
  f.name = "hamming_to_set";
  f.delta.assign(n, 1.0 / double(n));
  f.evaluate = [n, set = std::move(members)](PathView x) {
    std::size_t best = n;
    for (const auto& m : set) {
      std::size_t diff = 0;
      for (std::size_t i = 0; i < n && diff < best; ++i) diff += x[i] != m[i];
      best = std::min(best, diff);
    }
    return double(best) / double(n);
  };
  return f;
}

LipschitzProfile site_indicator_profile(std::size_t n, std::size_t site) {
  if (n == 0) throw PreconditionError("path length must be at least 1");
  LipschitzProfile f;
  f.name = "site_indicator";
  f.delta.assign(n, 1.0 / double(n));
  f.evaluate = [site](PathView x) {
    const auto hits = std::count(x.begin(), x.end(), site);
    return double(hits) / double(x.size());
  };
  return f;
}

LipschitzProfile constant_profile(std::size_t n, double value) {
  LipschitzProfile f;
  f.name = "constant";
  f.delta.assign(n, 0.0);
  f.evaluate = [value](PathView) { return value; };
  return f;
}

PerturbationResult perturbation_test(const LipschitzProfile& f, std::size_t states,
                                     const Metric& metric, std::size_t trials, std::uint64_t seed) {
  if (states < 2) throw PreconditionError("perturbation needs at least two states");
  const std::size_t n = f.length();
  PerturbationResult out;
  out.trials = trials;
  CounterRng rng(seed);
  std::vector<std::size_t> x(n);
  for (std::size_t k = 0; k < trials; ++k) {
    for (auto& v : x) v = static_cast<std::size_t>(rng.uniform() * double(states));
    const std::size_t i = static_cast<std::size_t>(rng.uniform() * double(n));
    const double before = f.evaluate(x);
    const std::size_t old = x[i];
    x[i] = (old + 1 + static_cast<std::size_t>(rng.uniform() * double(states - 1))) % states;
    const double after = f.evaluate(x);
    const double change = std::abs(after - before);
    const double allowed = f.delta[i] * metric(old, x[i]);
    if (change > allowed + 1e-12 * std::max(1.0, std::abs(before))) ++out.violations;
    if (change > 0.0) out.worst_ratio = std::max(out.worst_ratio, allowed > 0.0 ? change / allowed : kInf);
  }
  return out;
}

// =============================================================================
// Deviation statistics
// =============================================================================

namespace {

// Shared reduction for weighted samples (weights sum to 1). `count` > 0
// turns on standard errors for i.i.d. draws.
DeviationStats summarize(std::span<const double> values, std::span<const double> weights,
                         std::size_t count, const StatsOptions& options) {
  DeviationStats s;
  const bool mc = count > 0;
  auto expect = [&](auto&& fn) {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += weights[i] * fn(values[i]);
    return acc;
  };
  auto se_of = [&](double first, double second) {
    return mc ? std::sqrt(std::max(0.0, second - first * first) / double(count)) : 0.0;
  };

  const double m = expect([](double v) { return v; });
  const double m2 = expect([](double v) { return v * v; });
  s.mean = {m, se_of(m, m2)};

  const int top = std::max(2, options.max_order);
  for (int k = 2; k <= top; ++k) {
    const double ck = expect([&](double v) { return std::pow(v - m, k); });
    const double c2k = expect([&](double v) { return std::pow(v - m, 2 * k); });
    s.central_moments[k] = {ck, se_of(ck, c2k)};
  }
  s.variance = s.central_moments[2];

  for (double lambda : options.lambda_grid) {
    const double e1 = expect([&](double v) { return std::exp(lambda * (v - m)); });
    const double e2 = expect([&](double v) { return std::exp(2.0 * lambda * (v - m)); });
    s.log_mgf[lambda] = {std::log(e1), se_of(e1, e2) / e1};
  }

  if (!options.t_grid.empty()) {
    // Sorted deviations make the tail non-increasing in t by construction.
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> dev(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - m);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return dev[a] < dev[b]; });
    std::vector<double> sorted(values.size()), suffix(values.size() + 1, 0.0);
    for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = dev[order[i]];
    for (std::size_t i = order.size(); i-- > 0;) suffix[i] = suffix[i + 1] + weights[order[i]];
    for (double t : options.t_grid) {
      const auto pos = std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
      const double p = std::min(1.0, suffix[static_cast<std::size_t>(pos)]);
      s.tail[t] = {p, mc ? std::sqrt(p * (1.0 - p) / double(count)) : 0.0};
    }
  }
  return s;
}

}  // namespace

DeviationStats mc_deviation_stats(const TransitionKernel& kernel, std::span<const double> nu,
                                  const LipschitzProfile& f, std::size_t n, std::size_t replicas,
                                  std::uint64_t seed, const StatsOptions& options) {
  if (replicas < 100) throw PreconditionError("need at least 100 replicas");
  if (nu.size() != kernel.size()) throw PreconditionError("stationary vector has the wrong length");
  require_length(f, n);
  const KernelSampler sampler(kernel);

  std::vector<double> values(replicas);
  parallel_for(replicas, options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> path(n);
    for (std::size_t r = begin; r < end; ++r) {
      CounterRng rng(derive_seed(seed, r));
      path[0] = sample_index(nu, rng.uniform());
      for (std::size_t i = 1; i < n; ++i) path[i] = sampler.step(path[i - 1], rng.uniform());
      values[r] = f.evaluate(path);
    }
  }, 64);

  const std::vector<double> weights(replicas, 1.0 / double(replicas));
  auto s = summarize(values, weights, replicas, options);
  s.n = n;
  s.replicas = replicas;
  s.seed = seed;
  return s;
}

std::vector<double> path_law(const TransitionKernel& kernel, std::span<const double> nu, std::size_t n) {
  if (n == 0) throw PreconditionError("path length must be at least 1");
  const std::size_t S = kernel.size();
  checked_power(S, n);
  std::vector<double> law(nu.begin(), nu.end()), next;
  for (std::size_t k = 1; k < n; ++k) {
    next.assign(law.size() * S, 0.0);
    for (std::size_t idx = 0; idx < law.size(); ++idx) {
      if (law[idx] == 0.0) continue;
      for (const auto& t : kernel.row(idx % S)) next[idx * S + t.to] += law[idx] * t.prob;
    }
    law.swap(next);
  }
  return law;
}

void decode_path(std::size_t index, std::size_t states, std::vector<std::size_t>& path) {
  for (std::size_t i = path.size(); i-- > 0;) {
    path[i] = index % states;
    index /= states;
  }
}

DeviationStats exact_deviation_stats(const TransitionKernel& kernel, std::span<const double> nu,
                                     const LipschitzProfile& f, std::size_t n,
                                     const StatsOptions& options) {
  require_length(f, n);
  const auto law = path_law(kernel, nu, n);
  std::vector<double> values(law.size());
  std::vector<std::size_t> path(n);
  for (std::size_t i = 0; i < law.size(); ++i) {
    decode_path(i, kernel.size(), path);
    values[i] = f.evaluate(path);
  }
  auto s = summarize(values, law, 0, options);
  s.n = n;
  s.exact = true;
  return s;
}

double exact_additive_variance(const TransitionKernel& kernel, std::span<const double> nu,
                               std::span<const double> g, std::size_t n) {
  const std::size_t S = kernel.size();
  if (g.size() != S || nu.size() != S) throw PreconditionError("observable has the wrong length");
  if (n == 0) throw PreconditionError("path length must be at least 1");
  double mu = 0.0;
  for (std::size_t x = 0; x < S; ++x) mu += nu[x] * g[x];
  std::vector<double> v(g.begin(), g.end()), next(S);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double cov = -mu * mu;
    for (std::size_t x = 0; x < S; ++x) cov += nu[x] * g[x] * v[x];
    total += (k == 0 ? double(n) : 2.0 * double(n - k)) * cov;
    for (std::size_t x = 0; x < S; ++x) {
      double acc = 0.0;
      for (const auto& t : kernel.row(x)) acc += t.prob * v[t.to];
      next[x] = acc;
    }
    v.swap(next);
  }
  return total / (double(n) * double(n));
}

// =============================================================================
// Verdicts
// =============================================================================

std::string verdict_name(VerdictKind k) {
  switch (k) {
    case VerdictKind::Pass: return "PASS";
    case VerdictKind::Inconclusive: return "INCONCLUSIVE";
    case VerdictKind::Fail: return "FAIL";
    case VerdictKind::NotApplicable: return "NOT-APPLICABLE";
  }
  return "?";
}

Verdict judge(std::string check, double estimate, double se, double bound, double at) {
  Verdict v;
  v.check = std::move(check);
  v.estimate = estimate;
  v.se = se;
  v.bound = bound;
  v.at = at;
  if (!std::isfinite(bound)) {
    v.kind = VerdictKind::NotApplicable;
    v.slack_ratio = 0.0;
    return v;
  }
  v.slack_ratio = bound > 0.0 ? estimate / bound : (estimate > 0.0 ? kInf : 0.0);
  // Absolute slack for round-off when both sides are exact.
  const double fuzz = 1e-12 * std::max(1.0, std::abs(bound));
  if (estimate - kPassSe * se <= bound + fuzz)
    v.kind = VerdictKind::Pass;
  else if (estimate - kInconclusiveSe * se <= bound + fuzz)
    v.kind = VerdictKind::Inconclusive;
  else
    v.kind = VerdictKind::Fail;
  return v;
}

Verdict worst_of(std::span<const Verdict> verdicts) {
  auto rank = [](VerdictKind k) {
    switch (k) {
      case VerdictKind::Fail: return 3;
      case VerdictKind::Inconclusive: return 2;
      case VerdictKind::Pass: return 1;
      case VerdictKind::NotApplicable: return 0;
    }
    return 0;
  };
  if (verdicts.empty()) return Verdict{};
  const Verdict* w = &verdicts.front();
  for (const auto& v : verdicts)
    if (rank(v.kind) > rank(w->kind) || (rank(v.kind) == rank(w->kind) && v.slack_ratio > w->slack_ratio))
      w = &v;
  return *w;
}

Verdict check_variance_bound(const DeviationStats& s, double C, std::span<const double> delta) {
  return judge("variance", s.variance.value, s.variance.se, C * lipschitz_l2(delta));
}

Verdict check_moment_bound(const DeviationStats& s, double C_p, std::span<const double> delta, int p) {
  const auto it = s.central_moments.find(2 * p);
  if (it == s.central_moments.end())
    throw PreconditionError("statistics lack the central moment of order " + std::to_string(2 * p));
  return judge("moment_p" + std::to_string(p), it->second.value, it->second.se,
               C_p * std::pow(lipschitz_l2(delta), p));
}

std::vector<Verdict> check_poly_tail(const DeviationStats& s, double C_p, std::span<const double> delta,
                                     int p) {
  std::vector<Verdict> out;
  const double l2 = lipschitz_l2(delta);
  for (const auto& [t, e] : s.tail)
    out.push_back(judge("poly_tail_p" + std::to_string(p), e.value, e.se,
                        std::isfinite(C_p) ? polynomial_tail(C_p, l2, p, t) : kInf, t));
  return out;
}

std::vector<Verdict> check_gaussian_mgf(const DeviationStats& s, double C_eps,
                                        std::span<const double> delta) {
  std::vector<Verdict> out;
  const double l2 = lipschitz_l2(delta);
  for (const auto& [lambda, e] : s.log_mgf)
    out.push_back(judge("gaussian_mgf", e.value, e.se, C_eps * lambda * lambda * l2 / 16.0, lambda));
  return out;
}

std::vector<Verdict> check_gaussian_tail(const DeviationStats& s, double C_eps,
                                         std::span<const double> delta) {
  std::vector<Verdict> out;
  const double l2 = lipschitz_l2(delta);
  for (const auto& [t, e] : s.tail)
    out.push_back(judge("gaussian_tail", e.value, e.se,
                        std::isfinite(C_eps) ? gaussian_tail_chernoff(C_eps, l2, t) : kInf, t));
  return out;
}

// =============================================================================
// Hamming neighborhoods
// =============================================================================

double hamming_threshold(std::size_t n, int p, double C_p, double prob_A) {
  if (p < 1) throw PreconditionError("p must be >= 1");
  if (!(prob_A > 0.0)) throw PreconditionError("P(A) must be positive");
  const double root = 1.0 / (2.0 * p);
  return std::pow(C_p, root) / (std::sqrt(double(n)) * std::pow(prob_A, root));
}

double hamming_lower_bound(double eps, std::size_t n, int p, double C_p, double prob_A) {
  const double threshold = hamming_threshold(n, p, C_p, prob_A);
  if (!(eps > threshold)) throw ThresholdNotMet(eps, threshold);
  return 1.0 - (C_p / std::pow(double(n), p)) / std::pow(eps - threshold, 2 * p);
}

std::vector<double> hamming_distance_to_set(std::size_t states, std::size_t n,
                                            const std::vector<bool>& member) {
  const std::size_t total = checked_power(states, n);
  if (member.size() != total) throw PreconditionError("membership table has the wrong size");
  constexpr auto kUnseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> steps(total, kUnseen);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < total; ++i)
    if (member[i]) {
      steps[i] = 0;
      queue.push_back(i);
    }
  std::vector<std::size_t> place(n);
  for (std::size_t i = n, w = 1; i-- > 0; w *= states) place[i] = w;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t digit = (u / place[i]) % states;
      const std::size_t base = u - digit * place[i];
      for (std::size_t d = 0; d < states; ++d) {
        const std::size_t v = base + d * place[i];
        if (steps[v] == kUnseen) {
          steps[v] = steps[u] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i)
    out[i] = steps[i] == kUnseen ? kInf : double(steps[i]) / double(n);
  return out;
}

HammingTable hamming_check(const TransitionKernel& kernel, std::span<const double> nu,
                           const HammingSet& A, int p, double C_p, std::span<const double> eps_grid) {
  const std::size_t S = kernel.size(), n = A.n;
  const auto law = path_law(kernel, nu, n);
  std::vector<bool> member(law.size());
  std::vector<std::size_t> path(n);
  double prob_A = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    decode_path(i, S, path);
    member[i] = A.contains(path);
    if (member[i]) prob_A += law[i];
  }
  if (!(prob_A > 0.0)) throw PreconditionError("set '" + A.name + "' has probability zero");
  const auto dist = hamming_distance_to_set(S, n, member);

  HammingTable table;
  table.n = n;
  table.p = p;
  table.C_p = C_p;
  table.prob_A = prob_A;
  table.threshold = hamming_threshold(n, p, C_p, prob_A);
  table.expected_distance_bound = table.threshold;
  for (std::size_t i = 0; i < law.size(); ++i) table.expected_distance += law[i] * dist[i];

  bool any_valid = false;
  for (double eps : eps_grid) {
    HammingRow row;
    row.eps = eps;
    for (std::size_t i = 0; i < law.size(); ++i)
      if (dist[i] <= eps + 1e-12) row.probability += law[i];
    row.valid = eps > table.threshold;
    if (row.valid) {
      any_valid = true;
      row.lower_bound = hamming_lower_bound(eps, n, p, C_p, prob_A);
      row.holds = row.probability >= row.lower_bound - 1e-12;
      if (!row.holds) ++table.violations;
    }
    table.rows.push_back(row);
  }
  if (!any_valid) throw ThresholdNotMet(eps_grid.empty() ? 0.0 : *std::max_element(eps_grid.begin(), eps_grid.end()),
                                        table.threshold);
  return table;
}

}  // namespace coupconc
