#include "coupconc/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "coupconc/errors.hpp"
#include "coupconc/parallel.hpp"
#include "coupconc/rng.hpp"

namespace coupconc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// out = Q in, row by row.
void multiply(const TransitionKernel& q, const std::vector<double>& in, std::vector<double>& out,
              unsigned threads) {
  parallel_for(q.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double s = 0.0;
      for (const auto& t : q.row(i)) s += t.prob * in[t.to];
      out[i] = s;
    }
  }, 4096);
}

void require_coalescing(const CouplingKernel& q) {
  if (!q.coalescing()) throw NotCoalescing();
}

}  // namespace

// =============================================================================
// Validation and built-in couplings
// =============================================================================

CouplingKernel validate_coupling(std::vector<std::vector<Transition>> product_rows,
                                 const TransitionKernel& base, double tol) {
  const std::size_t n = base.size();
  if (product_rows.size() != n * n)
    throw PreconditionError("coupling must have size^2 rows");

  CouplingKernel q;
  q.base_ = base;
  q.product_ = TransitionKernel::from_rows(std::move(product_rows));

  std::vector<double> first(n, 0.0), second(n, 0.0);
  std::vector<std::size_t> touched;
  q.coalescing_ = true;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      const std::size_t i = x * n + y;
      touched.clear();
      for (const auto& t : q.product_.row(i)) {
        const std::size_t tx = t.to / n, ty = t.to % n;
        first[tx] += t.prob;
        second[ty] += t.prob;
        touched.push_back(tx);
        touched.push_back(ty);
        if (x == y && tx != ty) q.coalescing_ = false;
      }
      auto check = [&](std::vector<double>& acc, std::size_t from, int coordinate) {
        for (const auto& t : base.row(from)) {
          if (std::abs(acc[t.to] - t.prob) > tol)
            throw MarginalViolation(x, y, t.to, coordinate, acc[t.to], t.prob);
          acc[t.to] = 0.0;
        }
        for (auto s : touched) {
          if (std::abs(acc[s]) > tol) throw MarginalViolation(x, y, s, coordinate, acc[s], 0.0);
          acc[s] = 0.0;
        }
      };
      check(first, x, 1);
      check(second, y, 2);
    }
  }
  return q;
}

CouplingKernel validate_coupling(const DenseMatrix& candidate, const TransitionKernel& base,
                                 double tol) {
  const auto m = static_cast<Eigen::Index>(base.size() * base.size());
  if (candidate.rows() != m || candidate.cols() != m)
    throw PreconditionError("coupling matrix must be size^2 x size^2");
  std::vector<std::vector<Transition>> rows(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (candidate(i, j) != 0.0)
        rows[static_cast<std::size_t>(i)].push_back({static_cast<std::size_t>(j), candidate(i, j)});
  return validate_coupling(std::move(rows), base, tol);
}

MarginalErrors marginal_errors(const CouplingKernel& q) {
  const std::size_t n = q.states();
  const DenseMatrix p = q.base().dense();
  MarginalErrors err;
  std::vector<double> first(n), second(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      std::fill(first.begin(), first.end(), 0.0);
      std::fill(second.begin(), second.end(), 0.0);
      for (const auto& t : q.row(x * n + y)) {
        first[t.to / n] += t.prob;
        second[t.to % n] += t.prob;
      }
      for (std::size_t s = 0; s < n; ++s) {
        err.first = std::max(err.first, std::abs(first[s] - p(Eigen::Index(x), Eigen::Index(s))));
        err.second = std::max(err.second, std::abs(second[s] - p(Eigen::Index(y), Eigen::Index(s))));
      }
    }
  }
  return err;
}

CouplingKernel independent_coupling(const TransitionKernel& kernel) {
  const std::size_t n = kernel.size();
  std::vector<std::vector<Transition>> rows(n * n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (const auto& a : kernel.row(x))
        for (const auto& b : kernel.row(y)) rows[x * n + y].push_back({a.to * n + b.to, a.prob * b.prob});
  return validate_coupling(std::move(rows), kernel);
}

CouplingKernel coalesced_independent_coupling(const TransitionKernel& kernel) {
  const std::size_t n = kernel.size();
  std::vector<std::vector<Transition>> rows(n * n);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      auto& row = rows[x * n + y];
      if (x == y) {
        for (const auto& a : kernel.row(x)) row.push_back({a.to * n + a.to, a.prob});
      } else {
        for (const auto& a : kernel.row(x))
          for (const auto& b : kernel.row(y)) row.push_back({a.to * n + b.to, a.prob * b.prob});
      }
    }
  }
  return validate_coupling(std::move(rows), kernel);
}

CouplingKernel quantile_coupling(const TransitionKernel& kernel) {
  const std::size_t n = kernel.size();
  std::vector<std::vector<Transition>> rows(n * n);
  std::vector<double> ca, cb;
  auto cumulative = [](std::span<const Transition> row, std::vector<double>& c) {
    c.clear();
    double s = 0.0;
    for (const auto& t : row) c.push_back(s += t.prob);
    c.back() = 1.0;
  };
  for (std::size_t x = 0; x < n; ++x) {
    const auto a = kernel.row(x);
    cumulative(a, ca);
    for (std::size_t y = 0; y < n; ++y) {
      const auto b = kernel.row(y);
      cumulative(b, cb);
      auto& row = rows[x * n + y];
      double pos = 0.0;
      std::size_t i = 0, j = 0;
      while (i < a.size() && j < b.size()) {
        const double end = std::min(ca[i], cb[j]);
        if (end > pos) row.push_back({a[i].to * n + b[j].to, end - pos});
        pos = std::max(pos, end);
        if (ca[i] <= end) ++i;
        if (cb[j] <= end) ++j;
      }
    }
  }
  return validate_coupling(std::move(rows), kernel);
}

// =============================================================================
// Remainders
// =============================================================================

Contraction restricted_contraction(const CouplingKernel& q, std::size_t max_block) {
  require_coalescing(q);
  std::vector<double> h(q.pairs()), next(q.pairs());
  for (std::size_t i = 0; i < q.pairs(); ++i) h[i] = q.is_diagonal(i) ? 0.0 : 1.0;
  Contraction best{1, 1.0};
  double best_log_rate = 0.0;
  for (std::size_t k = 1; k <= max_block; ++k) {
    multiply(q.product(), h, next, 1);
    h.swap(next);
    const double s = *std::max_element(h.begin(), h.end());
    if (s <= 0.0) return {k, 0.0};
    const double log_rate = std::log(s) / double(k);
    if (log_rate < best_log_rate) {
      best_log_rate = log_rate;
      best = {k, s};
    }
    if (s <= 0.5) break;
  }
  return best;
}

double weighted_remainder(double tail_at_h, std::size_t h, const Contraction& c,
                          const std::function<double(std::size_t)>& weight) {
  if (tail_at_h <= 0.0) return 0.0;
  if (c.rate <= 0.0) {
    // Everything is absorbed within one block.
    double s = 0.0;
    for (std::size_t j = 1; j < c.block; ++j) s += weight(h + j);
    return tail_at_h * s;
  }
  if (c.rate >= 1.0) return kInf;
  double total = 0.0, factor = 1.0;
  constexpr std::size_t kMaxBlocks = 10'000'000;
  for (std::size_t m = 0; m < kMaxBlocks; ++m) {
    double block = 0.0;
    for (std::size_t j = std::max<std::size_t>(1, m * c.block); j < (m + 1) * c.block; ++j)
      block += weight(h + j);
    const double term = factor * block;
    total += term;
    if (m > 0 && term <= 1e-17 * total) return tail_at_h * total;
    factor *= c.rate;
  }
  return kInf;
}

// =============================================================================
// Forward survival from one start
// =============================================================================

namespace {

// Mass on off-diagonal pairs, pushed forward one step at a time.
class ForwardSurvival {
 public:
  ForwardSurvival(const CouplingKernel& q, StatePair start)
      : q_(q), mass_(q.pairs(), 0.0), scratch_(q.pairs(), 0.0) {
    if (start.x >= q.states() || start.y >= q.states()) throw PreconditionError("start out of range");
    const auto i = q.index(start);
    if (!q.is_diagonal(i)) {
      mass_[i] = 1.0;
      support_.push_back(i);
    }
  }

  double survival() const {
    double s = 0.0;
    for (auto i : support_) s += mass_[i];
    return s;
  }

  void step() {
    next_.clear();
    for (auto i : support_) {
      const double m = mass_[i];
      mass_[i] = 0.0;
      if (m == 0.0) continue;
      for (const auto& t : q_.row(i)) {
        if (q_.is_diagonal(t.to)) continue;
        if (scratch_[t.to] == 0.0) next_.push_back(t.to);
        scratch_[t.to] += m * t.prob;
      }
    }
    for (auto i : next_) {
      mass_[i] = scratch_[i];
      scratch_[i] = 0.0;
    }
    support_.swap(next_);
    std::sort(support_.begin(), support_.end());
  }

 private:
  const CouplingKernel& q_;
  std::vector<double> mass_;
  std::vector<double> scratch_;
  std::vector<std::size_t> support_;
  std::vector<std::size_t> next_;
};

}  // namespace

CouplingTimeDistribution coupling_tail_exact(const CouplingKernel& q, StatePair start,
                                             std::size_t horizon) {
  require_coalescing(q);
  if (horizon < 1) throw PreconditionError("horizon must be at least 1");
  CouplingTimeDistribution out;
  out.start = start;
  out.horizon = horizon;
  out.tail.reserve(horizon + 1);
  ForwardSurvival fwd(q, start);
  for (std::size_t t = 0; t <= horizon; ++t) {
    out.tail.push_back(fwd.survival());
    if (t < horizon) fwd.step();
  }
  if (out.tail.back() > 0.0) {
    out.tail_remainder_bound =
        weighted_remainder(out.tail.back(), horizon, restricted_contraction(q), [](std::size_t) { return 1.0; });
  }
  return out;
}

MomentEstimate moment_T(const CouplingKernel& q, StatePair start, double r, double shift,
                        const TailOptions& options) {
  require_coalescing(q);
  if (!(r > 0.0)) throw PreconditionError("moment order must be positive");
  auto g = [r, shift](double t) { return std::pow(t + shift, r); };
  auto w = [&g](std::size_t t) { return g(double(t) + 1.0) - g(double(t)); };

  MomentEstimate est;
  est.value = g(0.0);
  if (start.x == start.y) return est;

  ForwardSurvival fwd(q, start);
  std::optional<Contraction> contraction;
  for (std::size_t t = 0;; ++t) {
    const double tail = fwd.survival();
    est.value += w(t) * tail;
    est.horizon = t;
    if (tail == 0.0) {
      est.remainder = 0.0;
      return est;
    }
    if (t >= options.horizon && (t % 32 == 0 || t >= options.max_horizon)) {
      if (!contraction) contraction = restricted_contraction(q);
      est.remainder = weighted_remainder(tail, t, *contraction, w);
      if (est.remainder <= options.tol * std::max(1.0, est.value)) return est;
      if (t >= options.max_horizon) throw RemainderTooLarge(est.remainder, options.tol);
    }
    fwd.step();
  }
}

MomentEstimate fractional_moment_T(const CouplingKernel& q, StatePair start, double r,
                                   const TailOptions& options) {
  return moment_T(q, start, r, 1.0, options);
}

double expected_T_exact(const CouplingKernel& q, StatePair start) {
  require_coalescing(q);
  const auto s = q.index(start);
  if (q.is_diagonal(s)) return 0.0;

  // Off-diagonal pairs reachable from the start.
  constexpr auto kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> local(q.pairs(), kNone);
  std::vector<std::size_t> states{s};
  local[s] = 0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    for (const auto& t : q.row(states[k])) {
      if (q.is_diagonal(t.to) || local[t.to] != kNone) continue;
      local[t.to] = states.size();
      states.push_back(t.to);
    }
  }

  // Every reachable pair must be able to reach the diagonal.
  const std::size_t m = states.size();
  std::vector<std::vector<std::size_t>> reverse(m);
  std::vector<char> hits(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    for (const auto& t : q.row(states[k])) {
      if (q.is_diagonal(t.to))
        hits[k] = 1;
      else
        reverse[local[t.to]].push_back(k);
    }
  }
  std::queue<std::size_t> queue;
  for (std::size_t k = 0; k < m; ++k)
    if (hits[k]) queue.push(k);
  while (!queue.empty()) {
    const auto k = queue.front();
    queue.pop();
    for (auto pred : reverse[k])
      if (!hits[pred]) {
        hits[pred] = 1;
        queue.push(pred);
      }
  }
  if (std::find(hits.begin(), hits.end(), 0) != hits.end())
    throw SingularSystem("diagonal unreachable from some pair reachable from the start");

  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t k = 0; k < m; ++k) {
    triplets.emplace_back(Eigen::Index(k), Eigen::Index(k), 1.0);
    for (const auto& t : q.row(states[k]))
      if (!q.is_diagonal(t.to)) triplets.emplace_back(Eigen::Index(k), Eigen::Index(local[t.to]), -t.prob);
  }
  const auto dim = static_cast<Eigen::Index>(m);
  Eigen::SparseMatrix<double> a(dim, dim);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw SingularSystem("absorption system is singular");
  const Eigen::VectorXd h = lu.solve(Eigen::VectorXd::Ones(dim));
  return h(0);
}

// =============================================================================
// Simulation
// =============================================================================

std::size_t CouplingSamples::censored_count() const {
  return static_cast<std::size_t>(std::count(censored.begin(), censored.end(), std::uint8_t{1}));
}

CouplingSamples simulate_coupling(const CouplingKernel& q, StatePair start, std::size_t horizon,
                                  std::size_t replicas, std::uint64_t seed, unsigned threads) {
  if (replicas < 1) throw PreconditionError("replicas must be at least 1");
  const KernelSampler sampler(q.product());
  CouplingSamples out;
  out.horizon = horizon;
  out.T.resize(replicas);
  out.tau_hat.resize(replicas);
  out.censored.resize(replicas);
  const auto s0 = q.index(start);
  parallel_for(replicas, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      CounterRng rng(derive_seed(seed, r));
      std::size_t s = s0, last_apart = 0;
      bool ever_apart = false;
      double tau = 0.0;
      for (std::size_t j = 0; j <= horizon; ++j) {
        if (!q.is_diagonal(s)) {
          ever_apart = true;
          last_apart = j;
        }
        tau += q.distance(s);
        if (j < horizon) s = sampler.step(s, rng.uniform());
      }
      out.T[r] = ever_apart ? last_apart + 1 : 0;
      out.tau_hat[r] = tau;
      out.censored[r] = q.is_diagonal(s) ? 0 : 1;
    }
  }, 64);
  return out;
}

// =============================================================================
// Profiles
// =============================================================================

CouplingStats distance_profile_exact(const CouplingKernel& q, StatePair start, std::size_t horizon,
                                     std::span<const double> orders) {
  CouplingStats stats;
  stats.start = start;
  stats.horizon = horizon;
  std::vector<double> mu(q.pairs(), 0.0), next(q.pairs());
  mu[q.index(start)] = 1.0;
  for (std::size_t j = 0; j <= horizon; ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < q.pairs(); ++i)
      if (mu[i] != 0.0) d += mu[i] * q.distance(i);
    stats.distance_profile.push_back(d);
    if (j == horizon) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < q.pairs(); ++i) {
      if (mu[i] == 0.0) continue;
      for (const auto& t : q.row(i)) next[t.to] += mu[i] * t.prob;
    }
    mu.swap(next);
  }
  const auto& prof = stats.distance_profile;
  stats.tau_hat_mean = std::accumulate(prof.begin(), prof.end(), 0.0);
  for (std::size_t j = 0; j < horizon; ++j) {
    stats.alpha.push_back(prof[j] - prof[j + 1]);
    if (stats.alpha.back() < -1e-13) stats.negative_alpha = true;
  }
  for (double r : orders) {
    double m = 0.0;
    for (std::size_t j = 0; j < stats.alpha.size(); ++j) m += std::pow(double(j + 1), r) * stats.alpha[j];
    stats.M[r] = m;
  }
  return stats;
}

double PairField::max_remainder() const {
  return remainder.empty() ? 0.0 : *std::max_element(remainder.begin(), remainder.end());
}

double PairField::max_value() const {
  return value.empty() ? 0.0 : *std::max_element(value.begin(), value.end());
}

namespace {

enum class Source { Survival, Distance };

// Backward sweep over all pairs: value = base + sum_t weight(t) V_t with
// V_t = Q^t V_0, where V_0 is the off-diagonal indicator (Survival) or the
// distance (Distance). Stops once every pair's remainder is within tolerance.
PairField sweep_pairs(const CouplingKernel& q, Source source, double base,
                      const std::function<double(std::size_t)>& weight, const TailOptions& options) {
  const std::size_t m = q.pairs();
  const bool bounded = q.coalescing();
  const double dmax = q.base().metric().diameter(q.states());

  PairField out;
  out.states = q.states();
  out.value.assign(m, 0.0);
  out.remainder.assign(m, 0.0);

  std::vector<double> h(m), hn(m), dist, dn;
  for (std::size_t i = 0; i < m; ++i) h[i] = q.is_diagonal(i) ? 0.0 : 1.0;
  if (source == Source::Distance) {
    dist.resize(m);
    dn.resize(m);
    for (std::size_t i = 0; i < m; ++i) dist[i] = q.distance(i);
  }
  std::fill(out.value.begin(), out.value.end(), base);

  Contraction best{1, 1.0};
  double best_log_rate = 0.0;
  for (std::size_t t = 0;; ++t) {
    const auto& v = source == Source::Survival ? h : dist;
    const double w = weight(t);
    for (std::size_t i = 0; i < m; ++i) out.value[i] += w * v[i];
    out.horizon = t;

    const double s = bounded ? *std::max_element(h.begin(), h.end()) : 1.0;
    if (bounded && t > 0 && s < 1.0) {
      const double lr = s > 0.0 ? std::log(s) / double(t) : -kInf;
      if (lr < best_log_rate) {
        best_log_rate = lr;
        best = {t, s};
      }
    }
    if (bounded && s == 0.0) {
      std::fill(out.remainder.begin(), out.remainder.end(), 0.0);
      return out;
    }
    const bool at_end = t >= options.max_horizon;
    if (t >= options.horizon && (t % 16 == 0 || at_end)) {
      if (!bounded) {
        std::fill(out.remainder.begin(), out.remainder.end(), kInf);
        return out;
      }
      const double factor = weighted_remainder(1.0, t, best, weight) *
                            (source == Source::Distance ? dmax : 1.0);
      bool ok = true;
      for (std::size_t i = 0; i < m; ++i) {
        out.remainder[i] = h[i] > 0.0 ? h[i] * factor : 0.0;
        if (out.remainder[i] > options.tol * std::max(1.0, std::abs(out.value[i]))) ok = false;
      }
      if (ok || at_end) return out;
    }
    multiply(q.product(), h, hn, options.threads);
    h.swap(hn);
    if (source == Source::Distance) {
      multiply(q.product(), dist, dn, options.threads);
      dist.swap(dn);
    }
  }
}

}  // namespace

PairField all_pairs_T_moment(const CouplingKernel& q, double r, double shift, const TailOptions& options) {
  require_coalescing(q);
  if (!(r > 0.0)) throw PreconditionError("moment order must be positive");
  auto g = [r, shift](double t) { return std::pow(t + shift, r); };
  return sweep_pairs(q, Source::Survival, g(0.0),
                     [g](std::size_t t) { return g(double(t) + 1.0) - g(double(t)); }, options);
}

PairField all_pairs_tau_hat(const CouplingKernel& q, const TailOptions& options) {
  return sweep_pairs(q, Source::Distance, 0.0, [](std::size_t) { return 1.0; }, options);
}

PairField all_pairs_M(const CouplingKernel& q, double r, const TailOptions& options) {
  return sweep_pairs(q, Source::Distance, 0.0,
                     [r](std::size_t t) { return std::pow(double(t) + 1.0, r) - std::pow(double(t), r); },
                     options);
}

double PsiMatrix::row_sum(std::size_t x, std::size_t y) const {
  const auto begin = values.begin() + static_cast<std::ptrdiff_t>((x * states + y) * (horizon + 1));
  return std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(horizon + 1), 0.0);
}

PsiMatrix psi_matrix(const CouplingKernel& q, double epsilon, std::size_t horizon) {
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  const std::size_t n = q.states();
  const auto& p = q.base();
  PsiMatrix psi;
  psi.states = n;
  psi.horizon = horizon;
  psi.epsilon = epsilon;
  psi.values.assign(n * n * (horizon + 1), 0.0);
  psi.psi_eps_sq.assign(n * n, 0.0);

  std::vector<double> dist(q.pairs()), next(q.pairs());
  for (std::size_t i = 0; i < q.pairs(); ++i) dist[i] = q.distance(i);
  for (std::size_t j = 0; j <= horizon; ++j) {
    const double weight = std::pow(double(j + 1), 1.0 + epsilon);
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        double v = 0.0;
        for (const auto& t : p.row(x)) v += t.prob * dist[y * n + t.to];
        psi.values[(x * n + y) * (horizon + 1) + j] = v;
        psi.psi_eps_sq[x * n + y] += weight * v * v;
      }
    }
    if (j < horizon) {
      multiply(q.product(), dist, next, 1);
      dist.swap(next);
    }
  }
  return psi;
}

}  // namespace coupconc
