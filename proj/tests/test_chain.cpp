#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "coupconc/chain.hpp"
#include "coupconc/errors.hpp"
#include "oracles.hpp"

using namespace coupconc;

// ==== kernel validation ======================================================

TEST(Kernel, RejectsBadRowSum) {
  EXPECT_THROW(TransitionKernel::from_rows({{{0, 0.5}, {1, 0.4}}, {{0, 1.0}}}), RowSumError);
}

TEST(Kernel, RejectsNegativeEntry) {
  EXPECT_THROW(TransitionKernel::from_rows({{{0, 1.2}, {1, -0.2}}, {{0, 1.0}}}), NegativeEntry);
}

TEST(Kernel, RejectsTargetOutOfRange) {
  EXPECT_THROW(TransitionKernel::from_rows({{{2, 1.0}}, {{0, 1.0}}}), PreconditionError);
}

TEST(Kernel, MergesDuplicatesAndDropsZeros) {
  auto k = TransitionKernel::from_rows({{{1, 0.25}, {1, 0.25}, {0, 0.5}, {0, 0.0}}, {{0, 1.0}}});
  EXPECT_EQ(k.row(0).size(), 2u);
  EXPECT_DOUBLE_EQ(k.prob(0, 1), 0.5);
  EXPECT_EQ(k.nonzeros(), 3u);
}

TEST(Kernel, DenseRoundTrip) {
  const auto m = oracle::random_stochastic(6, 3);
  const auto k = validate_kernel(m);
  EXPECT_LT((k.dense() - m).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Metric, TableValidation) {
  EXPECT_NO_THROW(Metric::table({0, 2, 2, 0}, 2));
  EXPECT_THROW(Metric::table({0, 2, 1, 0}, 2), PreconditionError);  // asymmetric
  EXPECT_THROW(Metric::table({1, 2, 2, 0}, 2), PreconditionError);  // nonzero diagonal
  EXPECT_DOUBLE_EQ(Metric::line()(2, 7), 5.0);
  EXPECT_DOUBLE_EQ(Metric::discrete().diameter(4), 1.0);
  EXPECT_DOUBLE_EQ(Metric::line().diameter(4), 3.0);
}

// ==== ergodicity =============================================================

TEST(Ergodicity, DetectsReducible) {
  auto k = TransitionKernel::from_rows({{{0, 1.0}}, {{0, 0.5}, {1, 0.5}}});
  EXPECT_FALSE(check_ergodicity(k).irreducible);
  EXPECT_THROW(stationary_solve(k), NotErgodic);
}

TEST(Ergodicity, DetectsPeriodTwo) {
  auto k = TransitionKernel::from_rows({{{1, 1.0}}, {{0, 1.0}}});
  const auto r = check_ergodicity(k);
  EXPECT_TRUE(r.irreducible);
  EXPECT_EQ(r.period, 2u);
  EXPECT_THROW(stationary_solve(k), NotErgodic);
}

TEST(Ergodicity, PeriodThreeCycle) {
  auto k = TransitionKernel::from_rows({{{1, 1.0}}, {{2, 1.0}}, {{0, 1.0}}});
  EXPECT_EQ(check_ergodicity(k).period, 3u);
}

// ==== stationary law =========================================================

class StationaryRandom : public ::testing::TestWithParam<int> {};

TEST_P(StationaryRandom, MatchesMatrixPowerOracle) {
  const auto m = oracle::random_stochastic(7, std::uint64_t(GetParam()));
  const auto k = validate_kernel(m);
  const auto st = stationary_solve(k);
  const auto ref = oracle::stationary_by_powers(m);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(st.probs[i], ref(Eigen::Index(i)), 1e-12);
  EXPECT_LE(stationary_residual(k, st.probs), 1e-12);
  EXPECT_NEAR(std::accumulate(st.probs.begin(), st.probs.end(), 0.0), 1.0, 1e-14);
}

INSTANTIATE_TEST_SUITE_P(Seeds, StationaryRandom, ::testing::Range(1, 11));

TEST(Stationary, PowerIterationAgreesWithDirect) {
  const auto m = oracle::random_stochastic(12, 99);
  const auto k = validate_kernel(m);
  StationaryOptions opts;
  opts.direct_limit = 0;  // force power iteration
  const auto power = stationary_solve(k, opts);
  const auto direct = stationary_solve(k);
  EXPECT_EQ(power.method, "power");
  EXPECT_EQ(direct.method, "direct");
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(power.probs[i], direct.probs[i], 1e-9);
}

TEST(Stationary, TwoStateClosedForm) {
  // nu = (b, a) / (a + b) for P = [[1-a, a], [b, 1-b]].
  const double a = 0.3, b = 0.1;
  auto k = TransitionKernel::from_rows({{{0, 1 - a}, {1, a}}, {{0, b}, {1, 1 - b}}});
  const auto st = stationary_solve(k);
  EXPECT_NEAR(st.probs[0], b / (a + b), 1e-14);
  EXPECT_NEAR(st.probs[1], a / (a + b), 1e-14);
}

TEST(Stationary, SingleState) {
  auto k = TransitionKernel::from_rows({{{0, 1.0}}});
  EXPECT_DOUBLE_EQ(stationary_solve(k).probs[0], 1.0);
}

// ==== sampling ===============================================================

TEST(Sampling, DeterministicInSeed) {
  const auto k = validate_kernel(oracle::random_stochastic(5, 4));
  const std::vector<double> init(5, 0.2);
  const auto a = sample_path(k, init, 300, 17);
  const auto b = sample_path(k, init, 300, 17);
  const auto c = sample_path(k, init, 300, 18);
  EXPECT_EQ(a.states, b.states);
  EXPECT_NE(a.states, c.states);
  EXPECT_EQ(a.states.size(), 300u);
}

TEST(Sampling, OccupationFrequenciesMatchStationary) {
  const auto m = oracle::random_stochastic(4, 8);
  const auto k = validate_kernel(m);
  const auto nu = stationary_solve(k).probs;
  const std::size_t n = 200000;
  const auto path = sample_path(k, nu, n, 5);
  std::vector<double> freq(4, 0.0);
  for (auto s : path.states) freq[s] += 1.0 / double(n);
  // Markov-chain SE is inflated by autocorrelation; 0.01 is ~10 naive SEs.
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(freq[i], nu[i], 0.01);
}

TEST(Sampling, SampleIndexInverseCdf) {
  const std::vector<double> p = {0.2, 0.0, 0.5, 0.3};
  EXPECT_EQ(sample_index(p, 0.0), 0u);
  EXPECT_EQ(sample_index(p, 0.19), 0u);
  EXPECT_EQ(sample_index(p, 0.2), 2u);
  EXPECT_EQ(sample_index(p, 0.69), 2u);
  EXPECT_EQ(sample_index(p, 0.71), 3u);
  EXPECT_EQ(sample_index(p, 0.999999), 3u);
}

// ==== truncation =============================================================

namespace {
// Reflected random walk on N with drift toward 0: geometric stationary law.
CountableKernel drift_walk(double up) {
  return CountableKernel{[up](std::size_t n) {
                           if (n == 0) return std::vector<Transition>{{0, 1 - up}, {1, up}};
                           return std::vector<Transition>{{n - 1, 1 - up}, {n + 1, up}};
                         },
                         {}};
}
}  // namespace

TEST(Truncation, FoldsOverflowIntoTopState) {
  const auto t = truncate_countable(drift_walk(0.3), 10, 1.0);
  EXPECT_EQ(t.kernel.size(), 10u);
  EXPECT_DOUBLE_EQ(t.kernel.prob(9, 9), 0.3);
  EXPECT_DOUBLE_EQ(t.kernel.prob(9, 8), 0.7);
}

TEST(Truncation, TailMassEstimateMatchesGeometric) {
  // nu(k) proportional to r^k, r = up / (1 - up): mass above cap is r^cap.
  const double up = 0.3, r = up / (1 - up);
  const auto t = truncate_countable(drift_walk(up), 12, 1.0);
  EXPECT_NEAR(t.tail_mass, std::pow(r, 12), 1e-6);
}

TEST(Truncation, DeepTailHasSmallRelativeError) {
  // Detailed balance gives nu(k) proportional to r^k on the folded walk; the
  // top entries sit near 1e-73 and must still be right to many digits.
  const double up = 0.3, r = up / (1 - up);
  const std::size_t cap = 200;
  const auto t = truncate_countable(drift_walk(up), cap, 1.0);
  const auto nu = stationary_solve(t.kernel).probs;
  const double norm = (1 - r) / (1 - std::pow(r, double(cap)));
  for (std::size_t k = 0; k < cap; ++k) {
    const double ref = norm * std::pow(r, double(k));
    EXPECT_NEAR(nu[k] / ref, 1.0, 1e-12) << "k=" << k;
  }
}

TEST(Truncation, MassTolerance) {
  EXPECT_THROW(truncate_countable(drift_walk(0.45), 5, 1e-6), MassTolExceeded);
  EXPECT_THROW(truncate_countable(drift_walk(0.3), 1, 1.0), PreconditionError);
}
