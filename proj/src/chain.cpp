#include "coupconc/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <vector>


#include "coupconc/errors.hpp"
#include "coupconc/rng.hpp"

namespace coupconc {

// =============================================================================
// Metric
// =============================================================================

Metric Metric::table(std::vector<double> values, std::size_t size) {
  if (values.size() != size * size)
    throw PreconditionError("metric table must be size x size");
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double d = values[i * size + j];
      if (i == j && d != 0.0) throw PreconditionError("metric(i,i) must be 0");
      if (i != j && !(d > 0.0)) throw PreconditionError("metric(i,j) must be > 0 for i != j");
      if (d != values[j * size + i]) throw PreconditionError("metric must be symmetric");
    }
  }
  return Metric(Kind::Table, std::move(values), size);
}

double Metric::diameter(std::size_t size) const {
  switch (kind_) {
    case Kind::Discrete: return size > 1 ? 1.0 : 0.0;
    case Kind::Line: return size > 0 ? double(size - 1) : 0.0;
    case Kind::Table: return table_.empty() ? 0.0 : *std::max_element(table_.begin(), table_.end());
  }
  return 0.0;
}

std::string Metric::name() const {
  switch (kind_) {
    case Kind::Discrete: return "discrete";
    case Kind::Line: return "line";
    case Kind::Table: return "table";
  }
  return "?";
}

// =============================================================================
// TransitionKernel
// =============================================================================

TransitionKernel TransitionKernel::from_rows(std::vector<std::vector<Transition>> rows,
                                             Metric metric,
                                             std::vector<std::string> labels) {
  if (rows.empty()) throw PreconditionError("kernel needs at least one state");
  const std::size_t n = rows.size();
  if (!labels.empty() && labels.size() != n)
    throw PreconditionError("label count differs from state count");

  TransitionKernel k;
  k.space_ = StateSpace{n, std::move(metric), std::move(labels)};
  k.offsets_.reserve(n + 1);
  k.offsets_.push_back(0);
  for (std::size_t x = 0; x < n; ++x) {
    auto& row = rows[x];
    std::sort(row.begin(), row.end(),
              [](const Transition& a, const Transition& b) { return a.to < b.to; });
    double sum = 0.0;
    std::size_t start = k.entries_.size();
    for (const auto& t : row) {
      if (t.to >= n) throw PreconditionError("transition target out of range");
      if (!(t.prob >= 0.0) || t.prob > 1.0) throw NegativeEntry(x, t.to, t.prob);
      sum += t.prob;
      if (t.prob == 0.0) continue;
      if (k.entries_.size() > start && k.entries_.back().to == t.to)
        k.entries_.back().prob += t.prob;
      else
        k.entries_.push_back(t);
    }
    if (std::abs(sum - 1.0) > kRowSumTol) throw RowSumError(x, sum);
    k.offsets_.push_back(k.entries_.size());
  }
  return k;
}

double TransitionKernel::prob(std::size_t x, std::size_t y) const {
  for (const auto& t : row(x))
    if (t.to == y) return t.prob;
  return 0.0;
}

DenseMatrix TransitionKernel::dense() const {
  DenseMatrix m = DenseMatrix::Zero(size(), size());
  for (std::size_t x = 0; x < size(); ++x)
    for (const auto& t : row(x)) m(x, t.to) = t.prob;
  return m;
}

TransitionKernel validate_kernel(const DenseMatrix& rows, Metric metric) {
  if (rows.rows() == 0 || rows.rows() != rows.cols())
    throw PreconditionError("kernel matrix must be square and non-empty");
  const auto n = static_cast<std::size_t>(rows.rows());
  std::vector<std::vector<Transition>> sparse(n);
  for (std::size_t x = 0; x < n; ++x) {
    double sum = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      const double p = rows(x, y);
      if (!(p >= 0.0) || p > 1.0) throw NegativeEntry(x, y, p);
      sum += p;
      if (p > 0.0) sparse[x].push_back({y, p});
    }
    if (std::abs(sum - 1.0) > kRowSumTol) throw RowSumError(x, sum);
  }
  return TransitionKernel::from_rows(std::move(sparse), std::move(metric));
}

// =============================================================================
// Ergodicity
// =============================================================================

namespace {

std::vector<std::size_t> bfs_levels(const std::vector<std::vector<std::size_t>>& adj,
                                    std::size_t source) {
  constexpr auto kUnseen = static_cast<std::size_t>(-1);
  std::vector<std::size_t> level(adj.size(), kUnseen);
  std::queue<std::size_t> queue;
  level[source] = 0;
  queue.push(source);
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop();
    for (auto v : adj[u]) {
      if (level[v] == kUnseen) {
        level[v] = level[u] + 1;
        queue.push(v);
      }
    }
  }
  return level;
}

}  // namespace

ErgodicityReport check_ergodicity(const TransitionKernel& kernel) {
  const std::size_t n = kernel.size();
  std::vector<std::vector<std::size_t>> forward(n), backward(n);
  for (std::size_t x = 0; x < n; ++x) {
    for (const auto& t : kernel.row(x)) {
      forward[x].push_back(t.to);
      backward[t.to].push_back(x);
    }
  }
  [[maybe_unused]] constexpr auto kUnseen = static_cast<std::size_t>(-1);
  const auto level = bfs_levels(forward, 0);
  const auto back = bfs_levels(backward, 0);
  ErgodicityReport report;
  report.irreducible = std::none_of(level.begin(), level.end(), [](auto l) { return l == kUnseen; }) &&
                       std::none_of(back.begin(), back.end(), [](auto l) { return l == kUnseen; });
  if (!report.irreducible) return report;

  // In a strongly connected graph the period is the gcd of
  // level(u) + 1 - level(v) over all edges u -> v.
  std::size_t g = 0;
  for (std::size_t u = 0; u < n; ++u) {
    for (auto v : forward[u]) {
      const auto a = level[u] + 1, b = level[v];
      g = std::gcd(g, a > b ? a - b : b - a);
    }
  }
  report.period = g;
  return report;
}

// =============================================================================
// Stationary distribution
// =============================================================================

double stationary_residual(const TransitionKernel& kernel, std::span<const double> nu) {
  std::vector<double> next(kernel.size(), 0.0);
  for (std::size_t x = 0; x < kernel.size(); ++x)
    for (const auto& t : kernel.row(x)) next[t.to] += nu[x] * t.prob;
  double r = 0.0;
  for (std::size_t x = 0; x < kernel.size(); ++x) r = std::max(r, std::abs(next[x] - nu[x]));
  return r;
}

namespace {

void normalize(std::vector<double>& v) {
  for (auto& x : v)
    if (x < 0.0) x = 0.0;
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& x : v) x /= s;
}

// Grassmann-Taksar-Heyman elimination. No subtractions, so every entry of nu
// comes out with small relative error -- LU only bounds the absolute error,
// which is useless for stationary masses like 1e-30 deep in a heavy tail.
StationaryDistribution solve_direct(const TransitionKernel& kernel) {
  const std::size_t n = kernel.size();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t x = 0; x < n; ++x)
    for (const auto& t : kernel.row(x)) a[x * n + t.to] += t.prob;

  std::vector<std::size_t> rows, cols;
  for (std::size_t k = n; k-- > 1;) {
    rows.clear();
    cols.clear();
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (a[k * n + j] != 0.0) {
        s += a[k * n + j];
        cols.push_back(j);
      }
    if (s == 0.0) throw NotErgodic("stationary system is singular");
    for (std::size_t i = 0; i < k; ++i)
      if (a[i * n + k] != 0.0) {
        a[i * n + k] /= s;
        rows.push_back(i);
      }
    for (std::size_t i : rows) {
      const double f = a[i * n + k];
      for (std::size_t j : cols) a[i * n + j] += f * a[k * n + j];
    }
  }

  StationaryDistribution out;
  out.probs.assign(n, 0.0);
  out.probs[0] = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    double v = 0.0;
    for (std::size_t i = 0; i < k; ++i) v += out.probs[i] * a[i * n + k];
    out.probs[k] = v;
  }
  normalize(out.probs);
  out.method = "direct";
  out.residual = stationary_residual(kernel, out.probs);
  return out;
}

StationaryDistribution solve_power(const TransitionKernel& kernel, const StationaryOptions& options) {
  const std::size_t n = kernel.size();
  std::vector<double> nu(n, 1.0 / double(n)), next(n);
  StationaryDistribution out;
  out.method = "power";
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t x = 0; x < n; ++x)
      for (const auto& t : kernel.row(x)) next[t.to] += nu[x] * t.prob;
    double change = 0.0;
    for (std::size_t x = 0; x < n; ++x) change = std::max(change, std::abs(next[x] - nu[x]));
    nu.swap(next);
    if (change <= options.power_tol * 0.5) {
      normalize(nu);
      out.residual = stationary_residual(kernel, nu);
      if (out.residual <= options.power_tol) {
        out.probs = std::move(nu);
        out.iterations = it;
        return out;
      }
    }
  }
  throw NoConvergence("power iteration did not reach tolerance");
}

}  // namespace

StationaryDistribution stationary_solve(const TransitionKernel& kernel,
                                        const StationaryOptions& options) {
  const auto erg = check_ergodicity(kernel);
  if (!erg.irreducible) throw NotErgodic("chain is reducible");
  if (erg.period != 1) throw NotErgodic("chain has period " + std::to_string(erg.period));

  if (kernel.size() <= options.direct_limit) {
    auto out = solve_direct(kernel);
    if (out.residual > options.tol)
      throw NoConvergence("direct solve residual " + std::to_string(out.residual) +
                          " above tolerance");
    return out;
  }
  return solve_power(kernel, options);
}

// =============================================================================
// Sampling
// =============================================================================

KernelSampler::KernelSampler(const TransitionKernel& kernel) {
  offsets_.reserve(kernel.size() + 1);
  offsets_.push_back(0);
  for (std::size_t x = 0; x < kernel.size(); ++x) {
    double c = 0.0;
    for (const auto& t : kernel.row(x)) {
      c += t.prob;
      cumulative_.push_back(c);
      targets_.push_back(t.to);
    }
    offsets_.push_back(targets_.size());
  }
}

std::size_t KernelSampler::step(std::size_t x, double u) const {
  const auto begin = cumulative_.begin() + static_cast<std::ptrdiff_t>(offsets_[x]);
  const auto end = cumulative_.begin() + static_cast<std::ptrdiff_t>(offsets_[x + 1]);
  auto it = std::upper_bound(begin, end, u);
  if (it == end) --it;  // u above a cumulative sum that rounds below 1
  return targets_[static_cast<std::size_t>(it - cumulative_.begin())];
}

std::size_t sample_index(std::span<const double> probs, double u) {
  double c = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    c += probs[i];
    last = i;
    if (u < c) return i;
  }
  return last;
}

PathSample sample_path(const TransitionKernel& kernel, std::span<const double> init,
                       std::size_t n, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("path length must be at least 1");
  if (init.size() != kernel.size()) throw PreconditionError("initial law has wrong length");
  const double mass = std::accumulate(init.begin(), init.end(), 0.0);
  if (std::abs(mass - 1.0) > 1e-9) throw PreconditionError("initial law must sum to 1");

  KernelSampler sampler(kernel);
  CounterRng rng(seed);
  PathSample path;
  path.seed = seed;
  path.states.reserve(n);
  path.states.push_back(sample_index(init, rng.uniform()));
  while (path.states.size() < n) path.states.push_back(sampler.step(path.states.back(), rng.uniform()));
  return path;
}

// =============================================================================
// Truncation
// =============================================================================

namespace {

TransitionKernel fold_rows(const CountableKernel& chain, std::size_t cap, Metric metric) {
  std::vector<std::vector<Transition>> rows(cap);
  for (std::size_t x = 0; x < cap; ++x) {
    for (auto t : chain.row(x)) {
      if (t.to >= cap) t.to = cap - 1;
      rows[x].push_back(t);
    }
  }
  return TransitionKernel::from_rows(std::move(rows), std::move(metric));
}

}  // namespace

TruncatedChain truncate_countable(const CountableKernel& chain, std::size_t cap,
                                  double mass_tol, Metric metric) {
  if (cap < 2) throw PreconditionError("truncation cap must be at least 2");
  TruncatedChain out{fold_rows(chain, cap, std::move(metric)), 0.0};

  if (chain.tail_mass) {
    out.tail_mass = chain.tail_mass(cap);
  } else {
    const auto nu = stationary_solve(fold_rows(chain, 2 * cap, Metric::discrete()));
    out.tail_mass = std::accumulate(nu.probs.begin() + static_cast<std::ptrdiff_t>(cap),
                                    nu.probs.end(), 0.0);
  }
  if (out.tail_mass > mass_tol) throw MassTolExceeded(out.tail_mass, mass_tol);
  return out;
}

}  // namespace coupconc
