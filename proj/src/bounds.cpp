#include "coupconc/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coupconc/errors.hpp"
#include "coupconc/zeta.hpp"

namespace coupconc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_stationary(const CouplingKernel& q, std::span<const double> nu) {
  if (nu.size() != q.states()) throw PreconditionError("stationary vector has the wrong length");
}

// Throws when the inner series was cut off before reaching its tolerance.
void check_converged(const PairField& field, const TailOptions& options, const std::string& what) {
  for (std::size_t i = 0; i < field.value.size(); ++i) {
    if (field.remainder[i] > options.tol * std::max(1.0, std::abs(field.value[i])))
      throw DivergenceFlag(what + ": series not converged by horizon " +
                               std::to_string(field.horizon),
                           0.0);
  }
}

double prefactor(int p, double epsilon) {
  const double zeta = riemann_zeta(1.0 + epsilon).value;
  return std::pow(2.0 * p - 1.0, 2.0 * p) * std::pow(zeta / 2.0, p);
}

}  // namespace

// =============================================================================
// Constants
// =============================================================================

ConstantEstimate variance_constant(const CouplingKernel& q, std::span<const double> nu,
                                   const TailOptions& options) {
  require_stationary(q, nu);
  const auto tau = all_pairs_tau_hat(q, options);
  check_converged(tau, options, "variance constant");
  const auto& p = q.base();
  const std::size_t n = q.states();

  double c = 0.0, inner_max = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    for (const auto& tz : p.row(x)) {
      double inner = 0.0;
      for (const auto& ty : p.row(x)) inner += ty.prob * tau(tz.to, ty.to);
      inner_max = std::max(inner_max, inner);
      acc += tz.prob * inner * inner;
    }
    c += nu[x] * acc;
  }
  const double r = tau.max_remainder();
  return {c, 2.0 * inner_max * r + r * r, tau.horizon};
}

double moment_constant_sum(const TransitionKernel& p, std::span<const double> nu,
                           const PairField& inner, int order, double epsilon) {
  if (order < 1) throw PreconditionError("moment order p must be >= 1");
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  const std::size_t n = p.size();
  double sum = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    for (const auto& ty : p.row(x)) {
      double m = 0.0;
      for (const auto& tz : p.row(x)) m += tz.prob * inner(ty.to, tz.to);
      acc += ty.prob * std::pow(m, 2 * order);
    }
    sum += nu[x] * acc;
  }
  return prefactor(order, epsilon) * sum;
}

ConstantEstimate moment_constant(const CouplingKernel& q, std::span<const double> nu, int order,
                                 double epsilon, MetricRoute route, const TailOptions& options) {
  require_stationary(q, nu);
  if (order < 1) throw PreconditionError("moment order p must be >= 1");
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  const double r = 1.0 + epsilon / 2.0;
  const auto inner = route == MetricRoute::Discrete ? all_pairs_T_moment(q, r, 1.0, options)
                                                    : all_pairs_M(q, r, options);
  check_converged(inner, options, "moment constant p=" + std::to_string(order));

  const double value = moment_constant_sum(q.base(), nu, inner, order, epsilon);
  // Perturb every inner value by its remainder to bound the effect.
  PairField upper = inner;
  for (std::size_t i = 0; i < upper.value.size(); ++i) upper.value[i] += upper.remainder[i];
  const double hi = moment_constant_sum(q.base(), nu, upper, order, epsilon);
  return {value, hi - value, inner.horizon};
}

ConstantEstimate gaussian_constant(const CouplingKernel& q, double epsilon, MetricRoute route,
                                   const TailOptions& options) {
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  const double r = 1.0 + epsilon;
  const auto field = route == MetricRoute::Discrete ? all_pairs_T_moment(q, r, 0.0, options)
                                                    : all_pairs_M(q, r, options);
  check_converged(field, options, "gaussian constant");
  const double zeta = riemann_zeta(1.0 + epsilon).value;
  const double sup = field.max_value();
  const double rem = field.max_remainder();
  return {zeta * sup * sup, zeta * (2.0 * sup * rem + rem * rem), field.horizon};
}

double gaussian_constant_monotone(const CouplingKernel& q, StatePair worst,
                                  std::span<const StatePair> challengers, std::size_t horizon) {
  if (worst.x == worst.y) {
    if (q.states() > 1) throw DominanceViolated(worst.x, worst.y, 0);
    return 0.0;
  }
  const auto top = coupling_tail_exact(q, worst, horizon);
  for (const auto& c : challengers) {
    const auto tail = coupling_tail_exact(q, c, horizon);
    for (std::size_t t = 0; t <= horizon; ++t)
      if (tail.tail[t] > top.tail[t] + 1e-12) throw DominanceViolated(c.x, c.y, t);
  }
  return 0.5 * expected_T_exact(q, worst);
}

double gaussian_constant_monotone(const CouplingKernel& q, std::span<const StatePair> sequence,
                                  std::size_t horizon) {
  if (sequence.empty()) throw PreconditionError("empty pair sequence");
  std::vector<double> prev;
  for (const auto& s : sequence) {
    if (s.x == s.y) throw DominanceViolated(s.x, s.y, 0);
    auto tail = coupling_tail_exact(q, s, horizon).tail;
    for (std::size_t t = 0; t < prev.size(); ++t)
      if (tail[t] + 1e-12 < prev[t]) throw DominanceViolated(s.x, s.y, t);
    prev = std::move(tail);
  }
  return 0.5 * expected_T_exact(q, sequence.back());
}

// =============================================================================
// Cap-doubling study
// =============================================================================

CapStudy classify_growth(std::vector<std::size_t> caps, std::vector<double> values) {
  if (caps.size() != values.size() || values.size() < 2)
    throw PreconditionError("growth classification needs at least two caps");
  CapStudy out;
  out.caps = std::move(caps);
  out.values = std::move(values);
  std::vector<double> ratio;
  for (std::size_t i = 1; i < out.values.size(); ++i) {
    const double a = out.values[i - 1], b = out.values[i];
    ratio.push_back(!std::isfinite(b) ? kInf : a > 0.0 ? b / a : (b > 0.0 ? kInf : 1.0));
  }
  const double last = ratio.back();
  out.growth_exponent = std::isfinite(last) && last > 0.0 ? std::log2(last) : kInf;
  out.stable = std::abs(last - 1.0) < kStableChange;
  out.divergent = ratio.size() >= 2 && ratio[ratio.size() - 2] > 1.0 + kDivergentGrowth &&
                  last > 1.0 + kDivergentGrowth;
  return out;
}

CapStudy cap_doubling_study(const std::function<double(std::size_t)>& constant_at_cap,
                            std::size_t first_cap, std::size_t doublings) {
  if (doublings < 1) throw PreconditionError("need at least one doubling");
  std::vector<std::size_t> caps;
  std::vector<double> values;
  for (std::size_t k = 0, cap = first_cap; k <= doublings; ++k, cap *= 2) {
    caps.push_back(cap);
    try {
      values.push_back(constant_at_cap(cap));
    } catch (const DivergenceFlag&) {
      values.push_back(kInf);
    }
  }
  return classify_growth(std::move(caps), std::move(values));
}

// =============================================================================
// Reports
// =============================================================================

BoundConstants compute_constants(const CouplingKernel& q, std::span<const double> nu,
                                 const ConstantsRequest& req) {
  BoundConstants out;
  out.epsilon = req.epsilon;
  auto note = [&out](const ConstantEstimate& e) {
    out.horizon = std::max(out.horizon, e.horizon);
    out.remainder = std::max(out.remainder, e.remainder);
  };
  try {
    const auto v = variance_constant(q, nu, req.tail);
    out.C_var = v.value;
    note(v);
  } catch (const DivergenceFlag& e) {
    out.C_var = kInf;
    out.divergent["C_var"] = e.growth_exponent;
  }
  for (int p : req.orders) {
    try {
      const auto c = moment_constant(q, nu, p, req.epsilon, req.route, req.tail);
      out.C_p[p] = c.value;
      note(c);
    } catch (const DivergenceFlag& e) {
      out.divergent["C_p" + std::to_string(p)] = e.growth_exponent;
    }
  }
  try {
    const auto g = gaussian_constant(q, req.epsilon, req.route, req.tail);
    out.C_eps = g.value;
    note(g);
  } catch (const DivergenceFlag& e) {
    out.divergent["C_eps"] = e.growth_exponent;
  }
  if (req.worst_pair) out.C_monotone = gaussian_constant_monotone(q, *req.worst_pair, {});
  return out;
}

double lipschitz_l2(std::span<const double> delta) {
  double s = 0.0;
  for (double d : delta) s += d * d;
  return s;
}

double chebyshev_tail(double C, double l2, double t) { return C * l2 / (t * t); }

double polynomial_tail(double C_p, double l2, int p, double t) {
  return C_p * std::pow(l2, p) / std::pow(t, 2 * p);
}

double gaussian_tail(double C_eps, double l2, double t) {
  return 2.0 * std::exp(-4.0 * C_eps * t * t / l2);
}

double gaussian_tail_chernoff(double C_eps, double l2, double t) {
  return 2.0 * std::exp(-4.0 * t * t / (C_eps * l2));
}

BoundReport bound_report(const BoundConstants& constants, std::span<const double> delta,
                         std::span<const double> t_grid) {
  BoundReport report;
  report.constants = constants;
  report.lipschitz_l2 = lipschitz_l2(delta);
  const double l2 = report.lipschitz_l2;
  for (double t : t_grid) {
    if (!(t > 0.0)) throw PreconditionError("tail grid points must be positive");
    TailBoundRow row;
    row.t = t;
    row.chebyshev = chebyshev_tail(constants.C_var, l2, t);
    row.chebyshev_vacuous = row.chebyshev > 1.0;
    for (const auto& [p, c] : constants.C_p) {
      if (!std::isfinite(c)) continue;
      const double b = polynomial_tail(c, l2, p, t);
      row.polynomial_by_p[p] = b;
      if (!row.polynomial || b < *row.polynomial) {
        row.polynomial = b;
        row.best_p = p;
      }
    }
    row.polynomial_vacuous = row.polynomial && *row.polynomial > 1.0;
    if (constants.C_eps) {
      row.gaussian = gaussian_tail(*constants.C_eps, l2, t);
      row.gaussian_chernoff = gaussian_tail_chernoff(*constants.C_eps, l2, t);
      row.gaussian_vacuous = *row.gaussian > 1.0;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace coupconc
