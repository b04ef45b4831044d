#pragma once

// Empirical and exact checks of the concentration bounds on path functionals
// of the stationary chain, and Hamming-neighborhood concentration.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coupconc/chain.hpp"

namespace coupconc {

// =============================================================================
// Lipschitz functionals
// =============================================================================

using PathView = std::span<const std::size_t>;

/// A functional of length-n paths with coordinate-wise Lipschitz constants:
/// |f(x) - f(x')| <= delta[i] d(x_i, x'_i) whenever x, x' differ only at i.
struct LipschitzProfile {
  std::string name;
  std::function<double(PathView)> evaluate;
  std::vector<double> delta;
  std::size_t length() const { return delta.size(); }
};

/// (1/n) sum_i g(x_i); delta_i = Lip(g) / n under `metric`.
LipschitzProfile empirical_mean_profile(std::size_t n, std::vector<double> observable,
                                        const Metric& metric = Metric::discrete());
// The Hamming-type profiles below use delta_i = 1/n, valid for any metric
// whose distinct states are at distance >= 1 (discrete, line).

/// Fraction of sites where the path differs from `reference`.
LipschitzProfile hamming_to_path_profile(std::vector<std::size_t> reference);
/// Normalized Hamming distance to the nearest member of `members`
/// (each a length-n path).
LipschitzProfile hamming_to_set_profile(std::size_t n, std::vector<std::vector<std::size_t>> members);
/// Fraction of sites at state `site` (the top state, for truncated chains).
LipschitzProfile site_indicator_profile(std::size_t n, std::size_t site);
/// f = value, delta = 0.
LipschitzProfile constant_profile(std::size_t n, double value);

struct PerturbationResult {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max |df| / (delta_i d), 0/0 counted as 0
};

/// Random one-coordinate changes on uniformly drawn paths over `states`.
PerturbationResult perturbation_test(const LipschitzProfile& f, std::size_t states,
                                     const Metric& metric, std::size_t trials,
                                     std::uint64_t seed);

// =============================================================================
// Deviation statistics
// =============================================================================

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct StatsOptions {
  int max_order = 4;                  // central moments 2..max_order
  std::vector<double> lambda_grid;    // log E exp(lambda (f - mean))
  std::vector<double> t_grid;         // P(|f - mean| >= t)
  unsigned threads = 1;
};

struct DeviationStats {
  std::size_t n = 0;
  std::size_t replicas = 0;  // 0 for exact enumeration
  std::uint64_t seed = 0;
  bool exact = false;
  Estimate mean;
  Estimate variance;
  std::map<int, Estimate> central_moments;  // order -> E (f - mean)^order
  std::map<double, Estimate> log_mgf;
  std::map<double, Estimate> tail;
};

/// Stationary paths (X_0 ~ nu) of length n; replica r uses derive_seed(seed, r).
/// Throws PreconditionError for replicas < 100.
DeviationStats mc_deviation_stats(const TransitionKernel& kernel, std::span<const double> nu,
                                  const LipschitzProfile& f, std::size_t n, std::size_t replicas,
                                  std::uint64_t seed, const StatsOptions& options = {});

/// Path law of the stationary chain by full enumeration (states^n <= 2^22).
/// Index i encodes x_1 as the most significant base-|E| digit.
std::vector<double> path_law(const TransitionKernel& kernel, std::span<const double> nu,
                             std::size_t n);
void decode_path(std::size_t index, std::size_t states, std::vector<std::size_t>& path);

/// Same statistics computed exactly; all standard errors are zero.
DeviationStats exact_deviation_stats(const TransitionKernel& kernel, std::span<const double> nu,
                                     const LipschitzProfile& f, std::size_t n,
                                     const StatsOptions& options = {});

/// Var((1/n) sum_i g(X_i)) for the stationary chain, through the
/// autocovariances Cov(g(X_0), g(X_k)) = nu (g . P^k g) - (nu g)^2.
double exact_additive_variance(const TransitionKernel& kernel, std::span<const double> nu,
                               std::span<const double> observable, std::size_t n);

// =============================================================================
// Verdicts
// =============================================================================

enum class VerdictKind { Pass, Inconclusive, Fail, NotApplicable };

std::string verdict_name(VerdictKind k);

struct Verdict {
  VerdictKind kind = VerdictKind::NotApplicable;
  std::string check;
  double estimate = 0.0;
  double se = 0.0;
  double bound = 0.0;
  double slack_ratio = 0.0;  // estimate / bound
  double at = 0.0;           // t or lambda, when the check is pointwise
};

inline constexpr double kPassSe = 3.0;
inline constexpr double kInconclusiveSe = 6.0;

/// PASS if estimate - 3 SE <= bound; INCONCLUSIVE if only estimate - 6 SE
/// <= bound; FAIL otherwise; NOT-APPLICABLE when the bound is not finite.
Verdict judge(std::string check, double estimate, double se, double bound, double at = 0.0);

/// The least favorable verdict (FAIL > INCONCLUSIVE > PASS > NOT-APPLICABLE).
Verdict worst_of(std::span<const Verdict> verdicts);

Verdict check_variance_bound(const DeviationStats& stats, double C, std::span<const double> delta);
Verdict check_moment_bound(const DeviationStats& stats, double C_p, std::span<const double> delta,
                           int p);
std::vector<Verdict> check_poly_tail(const DeviationStats& stats, double C_p,
                                     std::span<const double> delta, int p);
std::vector<Verdict> check_gaussian_mgf(const DeviationStats& stats, double C_eps,
                                        std::span<const double> delta);
/// Against the tail implied by the MGF bound (gaussian_tail_chernoff).
std::vector<Verdict> check_gaussian_tail(const DeviationStats& stats, double C_eps,
                                         std::span<const double> delta);

// =============================================================================
// Hamming neighborhoods
// =============================================================================

struct HammingSet {
  std::string name;
  std::size_t n = 0;
  std::function<bool(PathView)> contains;
};

/// 1 - (C_p / n^p) / (eps - C_p^{1/2p} / (sqrt(n) P(A)^{1/2p}))^{2p}.
/// Throws ThresholdNotMet unless eps exceeds the validity threshold.
double hamming_lower_bound(double eps, std::size_t n, int p, double C_p, double prob_A);
double hamming_threshold(std::size_t n, int p, double C_p, double prob_A);

struct HammingRow {
  double eps = 0.0;
  bool valid = false;  // eps above the threshold
  double probability = 0.0;  // P([A]_eps)
  double lower_bound = 0.0;
  bool holds = false;
};

struct HammingTable {
  std::size_t n = 0;
  int p = 1;
  double C_p = 0.0;
  double prob_A = 0.0;
  double threshold = 0.0;
  double expected_distance = 0.0;        // E d(., A), exact
  double expected_distance_bound = 0.0;  // C_p^{1/2p} / (sqrt(n) P(A)^{1/2p})
  std::vector<HammingRow> rows;
  std::size_t violations = 0;
};

/// Exact enumeration over all states^n paths (<= 2^22). Rows with eps at or
/// below the threshold are kept with valid = false; throws ThresholdNotMet
/// if no grid point is valid and PreconditionError if P(A) = 0.
HammingTable hamming_check(const TransitionKernel& kernel, std::span<const double> nu,
                           const HammingSet& A, int p, double C_p,
                           std::span<const double> eps_grid);

/// Normalized Hamming distance of every path to A (multi-source BFS on the
/// Hamming graph), indexed as in path_law.
std::vector<double> hamming_distance_to_set(std::size_t states, std::size_t n,
                                            const std::vector<bool>& member);

}  // namespace coupconc
