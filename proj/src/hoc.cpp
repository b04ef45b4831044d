#include "coupconc/hoc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coupconc/errors.hpp"
#include "coupconc/rng.hpp"

namespace coupconc::hoc {

std::string family_name(Family f) {
  switch (f) {
    case Family::Case1: return "case1";
    case Family::Case2: return "case2";
    case Family::Case3: return "case3";
    case Family::Custom: return "custom";
  }
  return "?";
}

// =============================================================================
// QSequence
// =============================================================================

QSequence::QSequence(Family family, double parameter, std::vector<double> prefix)
    : family_(family), parameter_(parameter), prefix_(std::move(prefix)) {
  for (double v : prefix_)
    if (!(v > 0.0 && v < 1.0)) throw PreconditionError("every q_n must lie in (0,1)");
}

QSequence QSequence::case1(double alpha, std::vector<double> prefix) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("case1 needs 0 < alpha < 1");
  return QSequence(Family::Case1, alpha, std::move(prefix));
}

QSequence QSequence::case2(double gamma, std::vector<double> prefix) {
  if (!(gamma > 0.0)) throw PreconditionError("case2 needs gamma > 0");
  return QSequence(Family::Case2, gamma, std::move(prefix));
}

QSequence QSequence::case3(double q, std::vector<double> prefix) {
  if (!(q > 0.0 && q < 1.0)) throw PreconditionError("case3 needs 0 < q < 1");
  for (double v : prefix)
    if (v < q) throw PreconditionError("case3 prefix entries must be >= q (q is the infimum)");
  return QSequence(Family::Case3, q, std::move(prefix));
}

QSequence QSequence::custom(std::vector<double> values) {
  if (values.empty()) throw PreconditionError("custom q list is empty");
  return QSequence(Family::Custom, 0.0, std::move(values));
}

std::size_t QSequence::formula_start() const {
  switch (family_) {
    case Family::Case1: return 2;
    case Family::Case2: {
      // first integer n with n >= gamma + 1
      return static_cast<std::size_t>(std::ceil(parameter_ + 1.0));
    }
    case Family::Case3: return 0;
    case Family::Custom: return prefix_.size();
  }
  return 0;
}

double QSequence::formula(std::size_t n) const {
  switch (family_) {
    case Family::Case1: return std::pow(double(n), -parameter_);
    case Family::Case2: return parameter_ / double(n);
    case Family::Case3: return parameter_;
    case Family::Custom: break;
  }
  throw IndexBeyondCap(n, prefix_.size());
}

double QSequence::operator()(std::size_t n) const {
  if (n < prefix_.size()) return prefix_[n];
  if (family_ == Family::Custom) throw IndexBeyondCap(n, prefix_.size());
  return formula(std::max(n, formula_start()));
}

std::size_t QSequence::defined_up_to() const {
  return family_ == Family::Custom ? prefix_.size() : std::numeric_limits<std::size_t>::max();
}

double q_star(const QSequence& q, std::size_t n) {
  double m = q(0);
  for (std::size_t s = 1; s <= n; ++s) m = std::min(m, q(s));
  return m;
}

double stationary_tail_mass(const QSequence& q, std::size_t cap) {
  // Custom lists are extended by their last value for this estimate.
  const std::size_t defined = q.defined_up_to();
  auto qv = [&](std::size_t n) { return n < defined ? q(n) : q(defined - 1); };

  double below = 0.0, c = 1.0;
  for (std::size_t k = 0; k < cap; ++k) {
    below += c;
    c *= 1.0 - qv(k);
  }
  // c now holds c_cap.
  const std::size_t limit = std::max<std::size_t>(64 * cap, std::size_t{1} << 20);
  double above = 0.0, c_half = 0.0;
  std::size_t k = cap;
  for (; k < limit; ++k) {
    if (k == limit / 2) c_half = c;
    above += c;
    if (c * double(k) < 1e-20 * below) return above / (below + above);
    c *= 1.0 - qv(k);
  }
  // Polynomial tail c_k ~ k^-a: extrapolate sum_{j >= limit} c_j ~ c limit / (a - 1).
  const double a = c_half > 0.0 && c > 0.0 ? std::log(c_half / c) / std::log(2.0) : 0.0;
  if (a <= 1.0) return 1.0;
  above += c * double(limit) / (a - 1.0);
  return above / (below + above);
}

// =============================================================================
// Chain and coupling
// =============================================================================

HocChain build_hoc(const QSequence& q, std::size_t cap, double mass_tol) {
  if (cap < 2) throw PreconditionError("house-of-cards cap must be at least 2");
  if (cap > q.defined_up_to()) throw IndexBeyondCap(cap - 1, q.defined_up_to());

  CountableKernel countable{
      [&q](std::size_t n) {
        return std::vector<Transition>{{0, q(n)}, {n + 1, 1.0 - q(n)}};
      },
      [&q](std::size_t c) { return stationary_tail_mass(q, c); }};
  auto truncated = truncate_countable(countable, cap, mass_tol);

  const std::size_t n = cap;
  auto up = [n](std::size_t a) { return std::min(a + 1, n - 1); };
  std::vector<std::vector<Transition>> rows(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double qa = q(a), qb = q(b);
      const double lo = std::min(qa, qb), hi = std::max(qa, qb);
      auto& row = rows[a * n + b];
      row.push_back({0, lo});
      if (qa > qb)
        row.push_back({up(b), qa - qb});
      else if (qb > qa)
        row.push_back({up(a) * n, qb - qa});
      row.push_back({up(a) * n + up(b), 1.0 - hi});
    }
  }
  auto coupling = validate_coupling(std::move(rows), truncated.kernel);
  return HocChain{q, cap, std::move(truncated.kernel), std::move(coupling), truncated.tail_mass};
}

// =============================================================================
// Tail bounds
// =============================================================================

double tail_bound_coupes(const QSequence& q, std::size_t k, std::size_t t) {
  if (t == 0) return 1.0;
  if (k + t - 1 >= q.defined_up_to()) throw IndexBeyondCap(k + t - 1, q.defined_up_to());
  double qs = q_star(q, k);
  double prod = 1.0 - qs;
  for (std::size_t j = 1; j < t; ++j) {
    qs = std::min(qs, q(k + j));
    prod *= 1.0 - qs;
  }
  return prod;
}

double case1_tail_alca(double alpha, std::size_t k, double t, double c) {
  const double e = 1.0 - alpha;
  return c * std::exp(-(std::pow(t + double(k), e) - std::pow(double(k), e)) / e);
}

double fit_alca_constant(const QSequence& q, std::size_t k_max, std::size_t t_max) {
  if (q.family() != Family::Case1) throw PreconditionError("alca fit needs a case1 sequence");
  double c = 0.0;
  for (std::size_t k = 0; k <= k_max; ++k)
    for (std::size_t t = 1; t <= t_max; ++t)
      c = std::max(c, tail_bound_coupes(q, k, t) / case1_tail_alca(q.parameter(), k, double(t), 1.0));
  return c;
}

// =============================================================================
// Stationary law
// =============================================================================

StationaryProducts hoc_stationary_ck(const QSequence& q, std::size_t cap, double mass_tol) {
  if (cap < 2) throw PreconditionError("house-of-cards cap must be at least 2");
  const double tail = stationary_tail_mass(q, cap);
  if (tail > mass_tol) throw MassTolExceeded(tail, mass_tol);

  StationaryProducts out;
  out.c.resize(cap);
  out.c[0] = 1.0;
  for (std::size_t k = 1; k < cap; ++k) out.c[k] = out.c[k - 1] * (1.0 - q(k - 1));
  // Top state keeps its up-moves: nu(top) q_top = nu(top-1) (1 - q_{top-1}).
  out.c[cap - 1] /= q(cap - 1);

  double sum = 0.0;
  for (auto it = out.c.rbegin(); it != out.c.rend(); ++it) sum += *it;
  out.pi0 = 1.0 / sum;
  out.nu.resize(cap);
  for (std::size_t k = 0; k < cap; ++k) out.nu[k] = out.pi0 * out.c[k];
  return out;
}

double case1_ck_shape(double alpha, std::size_t k) {
  return std::exp(-std::pow(double(k), 1.0 - alpha) / (1.0 - alpha));
}

double fit_vende_constant(const QSequence& q, std::size_t k_max) {
  if (q.family() != Family::Case1) throw PreconditionError("vende fit needs a case1 sequence");
  double c = 1.0, best = 0.0;
  for (std::size_t k = 0; k <= k_max; ++k) {
    best = std::max(best, c / case1_ck_shape(q.parameter(), k));
    c *= 1.0 - q(k);
  }
  return best;
}

// =============================================================================
// Case-specific constants
// =============================================================================

int case2_moment_order_threshold(double gamma, double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  const double delta = epsilon / 2.0;
  if (!(gamma > 1.0 + delta))
    throw ConditionViolated("case2 needs gamma > 1 + epsilon/2");
  const double bound = (gamma - 1.0) / (2.0 * (delta + 1.0));
  const int p = static_cast<int>(std::ceil(bound)) - 1;
  return std::max(p, 0);
}

double case3_gaussian_C(double q) {
  if (!(q > 0.0 && q < 1.0)) throw PreconditionError("case3 needs 0 < q < 1");
  return 1.0 / (2.0 * (1.0 - q));
}

// =============================================================================
// Recursion simulation
// =============================================================================

RecursionPaths simulate_recursion(const QSequence& q, std::size_t k, std::size_t m,
                                  std::size_t steps, std::uint64_t seed) {
  std::vector<double> qstar;  // grown on demand
  auto star = [&](std::size_t n) {
    while (qstar.size() <= n)
      qstar.push_back(qstar.empty() ? q(0) : std::min(qstar.back(), q(qstar.size())));
    return qstar[n];
  };
  CounterRng rng(seed);
  RecursionPaths out;
  out.upper.push_back(k);
  out.lower.push_back(m);
  out.dominating.push_back(k);
  for (std::size_t t = 0; t < steps; ++t) {
    const double u = rng.uniform();
    const auto y1 = out.upper.back(), y2 = out.lower.back(), z = out.dominating.back();
    out.upper.push_back(u >= q(y1) ? y1 + 1 : 0);
    out.lower.push_back(u >= q(y2) ? y2 + 1 : 0);
    out.dominating.push_back(u >= star(z) ? z + 1 : 0);
  }
  return out;
}

}  // namespace coupconc::hoc
