#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace coupconc {

// =============================================================================
// State space
// =============================================================================

/// Distance between states. Discrete (1 off the diagonal), |i - j|, or an
/// explicit symmetric table.
class Metric {
 public:
  enum class Kind { Discrete, Line, Table };

  static Metric discrete() { return Metric(Kind::Discrete, {}, 0); }
  static Metric line() { return Metric(Kind::Line, {}, 0); }
  /// Row-major size x size table. Throws PreconditionError unless it is a
  /// metric's distance matrix (zero diagonal, symmetric, positive off it).
  static Metric table(std::vector<double> values, std::size_t size);

  Kind kind() const { return kind_; }
  double operator()(std::size_t i, std::size_t j) const {
    switch (kind_) {
      case Kind::Discrete: return i == j ? 0.0 : 1.0;
      case Kind::Line: return i > j ? double(i - j) : double(j - i);
      case Kind::Table: return table_[i * size_ + j];
    }
    return 0.0;
  }
  /// Largest distance among states 0..size-1.
  double diameter(std::size_t size) const;
  std::string name() const;

 private:
  Metric(Kind kind, std::vector<double> table, std::size_t size)
      : kind_(kind), table_(std::move(table)), size_(size) {}
  Kind kind_;
  std::vector<double> table_;
  std::size_t size_;
};

struct StateSpace {
  std::size_t size = 0;
  Metric metric = Metric::discrete();
  std::vector<std::string> labels;
};

// =============================================================================
// Transition kernel
// =============================================================================

struct Transition {
  std::size_t to;
  double prob;
};

using DenseMatrix = Eigen::MatrixXd;

inline constexpr double kRowSumTol = 1e-12;

/// Row-stochastic matrix stored by rows (zero entries dropped).
class TransitionKernel {
 public:
  /// Validates and stores `rows`; entries may repeat a target and are merged.
  /// Throws NegativeEntry, RowSumError, PreconditionError.
  static TransitionKernel from_rows(std::vector<std::vector<Transition>> rows,
                                    Metric metric = Metric::discrete(),
                                    std::vector<std::string> labels = {});

  std::size_t size() const { return space_.size; }
  const StateSpace& space() const { return space_; }
  const Metric& metric() const { return space_.metric; }

  std::span<const Transition> row(std::size_t x) const {
    return {entries_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
  }
  /// p(x, y); linear in the row length.
  double prob(std::size_t x, std::size_t y) const;
  std::size_t nonzeros() const { return entries_.size(); }
  DenseMatrix dense() const;

 private:
  StateSpace space_;
  std::vector<std::size_t> offsets_;
  std::vector<Transition> entries_;
};

/// Checks a square matrix of probabilities and builds the kernel.
TransitionKernel validate_kernel(const DenseMatrix& rows,
                                 Metric metric = Metric::discrete());

// =============================================================================
// Ergodicity and stationary distribution
// =============================================================================

struct ErgodicityReport {
  bool irreducible = false;
  std::size_t period = 0;  // gcd of cycle lengths; 0 when reducible
  bool ergodic() const { return irreducible && period == 1; }
};

ErgodicityReport check_ergodicity(const TransitionKernel& kernel);

struct StationaryDistribution {
  std::vector<double> probs;
  double residual = 0.0;  // max-norm of nu P - nu
  std::string method;     // "direct" or "power"
  std::size_t iterations = 0;
};

struct StationaryOptions {
  double tol = 1e-12;             // direct solve
  double power_tol = 1e-10;       // power iteration
  std::size_t direct_limit = 2000;
  std::size_t max_iterations = 10'000'000;
};

/// Throws NotErgodic, NoConvergence.
StationaryDistribution stationary_solve(const TransitionKernel& kernel,
                                        const StationaryOptions& options = {});

/// ||nu P - nu||_inf.
double stationary_residual(const TransitionKernel& kernel, std::span<const double> nu);

// =============================================================================
// Path sampling
// =============================================================================

struct PathSample {
  std::vector<std::size_t> states;
  std::uint64_t seed = 0;
};

/// Inverse-CDF sampler over the kernel rows.
class KernelSampler {
 public:
  explicit KernelSampler(const TransitionKernel& kernel);
  /// Next state from x given a uniform u in [0,1).
  std::size_t step(std::size_t x, double u) const;
  std::size_t size() const { return offsets_.size() - 1; }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<double> cumulative_;
  std::vector<std::size_t> targets_;
};

/// Draws an index from a probability vector with a uniform u in [0,1).
std::size_t sample_index(std::span<const double> probs, double u);

/// A length-n path, X_0 drawn from `init`. Deterministic in `seed`.
PathSample sample_path(const TransitionKernel& kernel, std::span<const double> init,
                       std::size_t n, std::uint64_t seed);

// =============================================================================
// Countable chains
// =============================================================================

/// Chain on {0, 1, 2, ...} given row by row.
struct CountableKernel {
  std::function<std::vector<Transition>(std::size_t)> row;
  /// Stationary mass of {cap, cap+1, ...} for the untruncated chain. When
  /// empty, estimated from the stationary law of a twice larger truncation.
  std::function<double(std::size_t cap)> tail_mass;
};

struct TruncatedChain {
  TransitionKernel kernel;
  double tail_mass = 0.0;
};

/// Restricts to states 0..cap-1; transitions leaving the range are folded
/// into the top state cap-1. Throws PreconditionError (cap < 2) and
/// MassTolExceeded.
TruncatedChain truncate_countable(const CountableKernel& chain, std::size_t cap,
                                  double mass_tol,
                                  Metric metric = Metric::discrete());

}  // namespace coupconc
