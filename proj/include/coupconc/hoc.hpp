#pragma once

// House-of-cards chains: from state n the chain moves to n + 1 with
// probability 1 - q_n and resets to 0 with probability q_n.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coupconc/chain.hpp"
#include "coupconc/coupling.hpp"

namespace coupconc::hoc {

enum class Family { Case1, Case2, Case3, Custom };

std::string family_name(Family f);

/// Reset probabilities q_0, q_1, ... Formula families are defined for every
/// n; indices the formula leaves free take the formula's value at its first
/// defined index unless an explicit prefix overrides them.
class QSequence {
 public:
  /// q_n = n^-alpha for n >= 2, 0 < alpha < 1.
  static QSequence case1(double alpha, std::vector<double> prefix = {});
  /// q_n = gamma / n for n >= gamma + 1, gamma > 0.
  static QSequence case2(double gamma, std::vector<double> prefix = {});
  /// Constant q (the infimum); prefix entries must be >= q.
  static QSequence case3(double q, std::vector<double> prefix = {});
  /// Explicit finite list.
  static QSequence custom(std::vector<double> values);

  /// Throws IndexBeyondCap past the defined range.
  double operator()(std::size_t n) const;
  /// One past the last defined index (SIZE_MAX for formula families).
  std::size_t defined_up_to() const;

  Family family() const { return family_; }
  double parameter() const { return parameter_; }
  const std::vector<double>& prefix() const { return prefix_; }
  /// First index where the formula applies.
  std::size_t formula_start() const;

 private:
  QSequence(Family family, double parameter, std::vector<double> prefix);
  double formula(std::size_t n) const;
  Family family_;
  double parameter_;
  std::vector<double> prefix_;
};

/// Running infimum q*_n = min_{s <= n} q_s.
double q_star(const QSequence& q, std::size_t n);

/// Stationary mass of {cap, cap+1, ...} for the untruncated chain.
double stationary_tail_mass(const QSequence& q, std::size_t cap);

struct HocChain {
  QSequence qseq;
  std::size_t cap = 0;
  TransitionKernel kernel;
  CouplingKernel coupling;  // shared uniform
  double tail_mass = 0.0;
};

/// Truncated kernel (top state's up-move becomes a self-loop) plus the
/// shared-uniform coupling. From (k, m), with a = k, b = m:
///   min(q_a, q_b)          -> (0, 0)
///   |q_a - q_b|            -> the coordinate with the larger q resets,
///                             the other moves up
///   1 - max(q_a, q_b)      -> both move up.
/// Throws PreconditionError, MassTolExceeded.
HocChain build_hoc(const QSequence& q, std::size_t cap, double mass_tol = 1.0);

/// prod_{j=0}^{t-1} (1 - q*_{k+j}): bound on P(T > t) from (k, m), k >= m.
/// Throws IndexBeyondCap when k + t - 1 is past the defined range.
double tail_bound_coupes(const QSequence& q, std::size_t k, std::size_t t);

/// C exp(-((t+k)^{1-alpha} - k^{1-alpha}) / (1 - alpha)).
double case1_tail_alca(double alpha, std::size_t k, double t, double c);

/// Smallest C with tail_bound_coupes <= case1_tail_alca on k <= k_max,
/// t = 1..t_max.
double fit_alca_constant(const QSequence& q, std::size_t k_max, std::size_t t_max);

struct StationaryProducts {
  std::vector<double> c;  // c_k = prod_{j<k} (1 - q_j); top entry folded
  double pi0 = 0.0;       // 1 / sum c
  std::vector<double> nu; // pi0 * c
};

/// Closed-form stationary law of the chain truncated at cap (top state
/// self-loop). Throws MassTolExceeded if the mass above cap exceeds mass_tol.
StationaryProducts hoc_stationary_ck(const QSequence& q, std::size_t cap, double mass_tol = 1.0);

/// c_k bound shape exp(-k^{1-alpha} / (1-alpha)) and its fitted constant
/// (max ratio over k <= k_max).
double case1_ck_shape(double alpha, std::size_t k);
double fit_vende_constant(const QSequence& q, std::size_t k_max);

/// Largest integer p >= 1 with p < (gamma - 1) / (2 (delta + 1)), delta =
/// epsilon / 2; 0 if none. Throws ConditionViolated unless gamma > 1 + delta.
int case2_moment_order_threshold(double gamma, double epsilon);

/// 1 / (2 (1 - q)).
double case3_gaussian_C(double q);

/// Trajectories of the recursion X' = (X + 1) 1{U >= q_X} started from k and
/// m, and of the auxiliary chain driven by q* from k, all with the same
/// uniforms. No truncation.
struct RecursionPaths {
  std::vector<std::size_t> upper;  // started at k
  std::vector<std::size_t> lower;  // started at m
  std::vector<std::size_t> dominating;
};

RecursionPaths simulate_recursion(const QSequence& q, std::size_t k, std::size_t m,
                                  std::size_t steps, std::uint64_t seed);

}  // namespace coupconc::hoc
