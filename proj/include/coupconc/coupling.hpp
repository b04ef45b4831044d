#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "coupconc/chain.hpp"

namespace coupconc {

struct StatePair {
  std::size_t x = 0;
  std::size_t y = 0;
  friend bool operator==(const StatePair&, const StatePair&) = default;
};

inline constexpr double kMarginalTol = 1e-10;

// =============================================================================
// Coupling kernel
// =============================================================================

/// Markov kernel on pairs (x, y), stored as a sparse kernel over the flat
/// index x * n + y. Both marginals reproduce the base kernel.
class CouplingKernel {
 public:
  const TransitionKernel& base() const { return base_; }
  const TransitionKernel& product() const { return product_; }
  std::size_t states() const { return base_.size(); }
  std::size_t pairs() const { return product_.size(); }
  std::size_t index(StatePair s) const { return s.x * states() + s.y; }
  StatePair pair(std::size_t i) const { return {i / states(), i % states()}; }
  bool is_diagonal(std::size_t i) const { return i / states() == i % states(); }

  /// Transitions out of a pair; targets are flat pair indices.
  std::span<const Transition> row(std::size_t i) const { return product_.row(i); }
  double prob(StatePair from, StatePair to) const { return product_.prob(index(from), index(to)); }
  bool coalescing() const { return coalescing_; }
  double distance(std::size_t i) const { return base_.metric()(i / states(), i % states()); }
  DenseMatrix dense() const { return product_.dense(); }

 private:
  friend CouplingKernel validate_coupling(std::vector<std::vector<Transition>>,
                                          const TransitionKernel&, double);
  TransitionKernel base_;
  TransitionKernel product_;
  bool coalescing_ = false;
};

/// Checks both marginal constraints and sets the coalescing flag. Throws
/// MarginalViolation naming the first offending (x, y, target).
CouplingKernel validate_coupling(std::vector<std::vector<Transition>> product_rows,
                                 const TransitionKernel& base, double tol = kMarginalTol);
CouplingKernel validate_coupling(const DenseMatrix& candidate, const TransitionKernel& base,
                                 double tol = kMarginalTol);

struct MarginalErrors {
  double first = 0.0;
  double second = 0.0;
};
/// Largest marginal deviation over all (x, y, target), summed exactly.
MarginalErrors marginal_errors(const CouplingKernel& coupling);

/// Q = p (x) p.
CouplingKernel independent_coupling(const TransitionKernel& kernel);
/// p (x) p off the diagonal; (x, x) -> (x', x') with probability p(x, x').
CouplingKernel coalesced_independent_coupling(const TransitionKernel& kernel);
/// Both copies driven by one uniform through their rows' inverse CDFs, with
/// states in index order. For i.i.d. rows this coalesces after one step.
CouplingKernel quantile_coupling(const TransitionKernel& kernel);

// =============================================================================
// Coupling time
// =============================================================================

/// Survival of the coupling time. tail[t] is the mass not yet absorbed on the
/// diagonal after t steps, P(T > t); tail[0] = 1 for distinct starts.
struct CouplingTimeDistribution {
  StatePair start;
  std::vector<double> tail;  // t = 0..horizon
  std::size_t horizon = 0;
  /// Bound on sum_{t > horizon} P(T > t).
  double tail_remainder_bound = 0.0;
};

/// sup over off-diagonal pairs of P(T > block) is at most `rate`.
struct Contraction {
  std::size_t block = 1;
  double rate = 1.0;
};

/// Smallest block (<= max_block) with a rate below 1/2, else the best one.
Contraction restricted_contraction(const CouplingKernel& coupling, std::size_t max_block = 256);

/// Bound on sum_{j >= 1} weight(h + j) P(T > h + j) given P(T > h) = tail_at_h.
double weighted_remainder(double tail_at_h, std::size_t h, const Contraction& contraction,
                          const std::function<double(std::size_t)>& weight);

struct TailOptions {
  std::size_t horizon = 500;        // minimum horizon
  std::size_t max_horizon = 1u << 16;
  double tol = 1e-10;               // remainder target, relative to max(1, value)
  unsigned threads = 1;
};

/// Throws NotCoalescing, PreconditionError (horizon < 1).
CouplingTimeDistribution coupling_tail_exact(const CouplingKernel& coupling, StatePair start,
                                             std::size_t horizon);

/// E[T] from (I - R) h = 1 on the off-diagonal pairs reachable from start.
/// Throws NotCoalescing, SingularSystem.
double expected_T_exact(const CouplingKernel& coupling, StatePair start);

struct MomentEstimate {
  double value = 0.0;
  double remainder = 0.0;  // bound on the neglected part
  std::size_t horizon = 0;
};

/// E[(T + shift)^r] through sum_t ((t+1+shift)^r - (t+shift)^r) P(T > t).
/// Extends the horizon up to max_horizon; throws RemainderTooLarge if the
/// remainder still exceeds tol * max(1, value).
MomentEstimate moment_T(const CouplingKernel& coupling, StatePair start, double r,
                        double shift, const TailOptions& options = {});

/// E[(T + 1)^r].
MomentEstimate fractional_moment_T(const CouplingKernel& coupling, StatePair start, double r,
                                   const TailOptions& options = {});

// =============================================================================
// Simulation
// =============================================================================

struct CouplingSamples {
  std::vector<std::size_t> T;         // last disagreement + 1 within the horizon
  std::vector<double> tau_hat;        // sum_{j <= horizon} d(U_j, V_j)
  std::vector<std::uint8_t> censored; // copies still apart at the horizon
  std::size_t horizon = 0;
  std::size_t censored_count() const;
};

CouplingSamples simulate_coupling(const CouplingKernel& coupling, StatePair start,
                                  std::size_t horizon, std::size_t replicas,
                                  std::uint64_t seed, unsigned threads = 1);

// =============================================================================
// Distance profiles, generalized coupling time, M_r
// =============================================================================

struct CouplingStats {
  StatePair start;
  std::vector<double> distance_profile;  // E d(U_j, V_j), j = 0..horizon
  double tau_hat_mean = 0.0;             // sum of the profile
  std::vector<double> alpha;             // profile[j] - profile[j+1]
  std::map<double, double> M;            // r -> sum_j (j+1)^r alpha_j
  bool negative_alpha = false;
  std::size_t horizon = 0;
};

CouplingStats distance_profile_exact(const CouplingKernel& coupling, StatePair start,
                                     std::size_t horizon, std::span<const double> orders = {});

/// A per-pair quantity over all n^2 starting pairs, index x * n + y.
struct PairField {
  std::size_t states = 0;
  std::vector<double> value;
  std::vector<double> remainder;
  std::size_t horizon = 0;
  double operator()(std::size_t x, std::size_t y) const { return value[x * states + y]; }
  double max_remainder() const;
  double max_value() const;
};

/// E_{u,v}((T + shift)^r) for every pair. Throws NotCoalescing.
PairField all_pairs_T_moment(const CouplingKernel& coupling, double r, double shift,
                             const TailOptions& options = {});
/// E_{u,v}(generalized coupling time) for every pair.
PairField all_pairs_tau_hat(const CouplingKernel& coupling, const TailOptions& options = {});
/// M_r for the coupling started at (u, v): sum_j (j+1)^r (D_j - D_{j+1}) with
/// D_j = E_{u,v} d(U_j, V_j).
PairField all_pairs_M(const CouplingKernel& coupling, double r, const TailOptions& options = {});

/// Psi_{x,y}(j) = sum_z p(x,z) E_{y,z} d(U_j, V_j) and
/// Psi_eps^2(x,y) = sum_j (j+1)^{1+eps} Psi_{x,y}(j)^2.
struct PsiMatrix {
  std::size_t states = 0;
  std::size_t horizon = 0;
  double epsilon = 0.0;
  std::vector<double> values;      // ((x * n + y) * (horizon + 1)) + j
  std::vector<double> psi_eps_sq;  // x * n + y
  double operator()(std::size_t x, std::size_t y, std::size_t j) const {
    return values[(x * states + y) * (horizon + 1) + j];
  }
  double row_sum(std::size_t x, std::size_t y) const;
};

PsiMatrix psi_matrix(const CouplingKernel& coupling, double epsilon, std::size_t horizon);

}  // namespace coupconc
