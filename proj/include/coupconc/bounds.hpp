#pragma once

// Concentration-bound constants built from coupling-time statistics, and the
// tail bounds they induce for Lipschitz functionals of the stationary chain.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coupconc/chain.hpp"
#include "coupconc/coupling.hpp"

namespace coupconc {

/// A constant together with the truncation bookkeeping of its series.
struct ConstantEstimate {
  double value = 0.0;
  double remainder = 0.0;  // bound on the neglected tail of the inner series
  std::size_t horizon = 0;
};

enum class MetricRoute {
  Discrete,  // coupling-time moments E[(T+1)^r], E[T^r]
  General,   // distance-profile analogue M_r
};

// =============================================================================
// Constants
// =============================================================================

/// sum_x nu(x) sum_z p(x,z) (sum_y p(x,y) E_{z,y}(tau_hat))^2.
/// Throws DivergenceFlag if the generalized coupling time series does not
/// converge within options.max_horizon.
ConstantEstimate variance_constant(const CouplingKernel& coupling, std::span<const double> nu,
                                   const TailOptions& options = {});

/// (2p-1)^{2p} (zeta(1+eps)/2)^p sum_{x,y} nu(x) p(x,y) (sum_z p(x,z) inner(y,z))^{2p}
/// for an arbitrary per-pair field `inner`.
double moment_constant_sum(const TransitionKernel& kernel, std::span<const double> nu,
                           const PairField& inner, int p, double epsilon);

/// Discrete route: inner = E_{y,z}((T+1)^{1+eps/2}).
/// General route: inner = M_{1+eps/2} from the distance profile.
/// Throws PreconditionError (p < 1, eps <= 0), DivergenceFlag.
ConstantEstimate moment_constant(const CouplingKernel& coupling, std::span<const double> nu,
                                 int p, double epsilon, MetricRoute route = MetricRoute::Discrete,
                                 const TailOptions& options = {});

/// zeta(1+eps) (sup_{u,v} E_{u,v}(T^{1+eps}))^2, or with M_{1+eps} on the
/// general route.
ConstantEstimate gaussian_constant(const CouplingKernel& coupling, double epsilon,
                                   MetricRoute route = MetricRoute::Discrete,
                                   const TailOptions& options = {});

/// Monotone coupling: C = E_{worst}(T) / 2. Every pair in `challengers` must
/// have P(T > t) <= that of `worst` for t <= horizon, else DominanceViolated.
double gaussian_constant_monotone(const CouplingKernel& coupling, StatePair worst,
                                  std::span<const StatePair> challengers,
                                  std::size_t horizon = 200);

/// Sequence form: tails must be pointwise non-decreasing along `sequence`
/// (else DominanceViolated); returns half the mean coupling time of the last
/// pair, which approximates the limit along the sequence from below.
double gaussian_constant_monotone(const CouplingKernel& coupling,
                                  std::span<const StatePair> sequence,
                                  std::size_t horizon = 200);

// =============================================================================
// Cap-doubling study
// =============================================================================

struct CapStudy {
  std::vector<std::size_t> caps;
  std::vector<double> values;
  bool divergent = false;  // grew by more than 20% on two consecutive doublings
  bool stable = false;     // last doubling changed the value by less than 5%
  double growth_exponent = 0.0;  // log2 of the last ratio
};

inline constexpr double kDivergentGrowth = 0.20;
inline constexpr double kStableChange = 0.05;

/// Evaluates `constant_at_cap` at first_cap, 2 first_cap, ... (doublings + 1
/// values). A DivergenceFlag raised at some cap counts as unbounded growth.
CapStudy cap_doubling_study(const std::function<double(std::size_t)>& constant_at_cap,
                            std::size_t first_cap, std::size_t doublings);

/// Classifies an existing value sequence (consecutive caps double).
CapStudy classify_growth(std::vector<std::size_t> caps, std::vector<double> values);

// =============================================================================
// Reports
// =============================================================================

struct BoundConstants {
  double C_var = 0.0;
  std::map<int, double> C_p;
  std::optional<double> C_eps;       // absent when divergent
  std::optional<double> C_monotone;  // when a worst pair is supplied
  double epsilon = 0.1;
  std::size_t horizon = 0;
  double remainder = 0.0;  // largest remainder over all constants
  std::map<std::string, double> divergent;  // constant name -> growth exponent
};

struct ConstantsRequest {
  double epsilon = 0.1;
  std::vector<int> orders = {1, 2};
  MetricRoute route = MetricRoute::Discrete;
  std::optional<StatePair> worst_pair;
  TailOptions tail;
};

/// Computes every constant; divergent ones are recorded instead of thrown.
BoundConstants compute_constants(const CouplingKernel& coupling, std::span<const double> nu,
                                 const ConstantsRequest& request);

struct TailBoundRow {
  double t = 0.0;
  double chebyshev = 0.0;
  std::optional<double> polynomial;  // best over finite C_p
  int best_p = 0;
  std::map<int, double> polynomial_by_p;
  std::optional<double> gaussian;           // displayed form
  std::optional<double> gaussian_chernoff;  // from the MGF bound
  bool chebyshev_vacuous = false;
  bool polynomial_vacuous = false;
  bool gaussian_vacuous = false;
};

struct BoundReport {
  BoundConstants constants;
  double lipschitz_l2 = 0.0;  // ||delta||_2^2
  std::vector<TailBoundRow> rows;
};

double lipschitz_l2(std::span<const double> delta);

double chebyshev_tail(double C, double l2, double t);
double polynomial_tail(double C_p, double l2, int p, double t);
/// 2 exp(-4 C_eps t^2 / l2), the displayed form, kept verbatim.
double gaussian_tail(double C_eps, double l2, double t);
/// 2 exp(-4 t^2 / (C_eps l2)): exponential Chebyshev applied to the MGF bound
/// exp(C_eps lambda^2 l2 / 16), optimized at lambda = 8 t / (C_eps l2).
double gaussian_tail_chernoff(double C_eps, double l2, double t);

BoundReport bound_report(const BoundConstants& constants, std::span<const double> delta,
                         std::span<const double> t_grid);

}  // namespace coupconc
