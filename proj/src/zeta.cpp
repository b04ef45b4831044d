#include "coupconc/zeta.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "coupconc/errors.hpp"

namespace coupconc {

namespace {

// B_{2k} / (2k)! for k = 1..10.
constexpr std::array<double, 10> kBernoulliOverFactorial = {
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
    -174611.0 / 802857662698291200000.0,
};

constexpr int kDirectTerms = 24;

}  // namespace

ZetaValue riemann_zeta(double s) {
  if (!(s > 1.0)) throw PreconditionError("zeta needs s > 1");
  const double n = kDirectTerms;

  // sum_{k<N} k^-s, smallest terms first.
  double sum = 0.0;
  for (int k = kDirectTerms - 1; k >= 1; --k) sum += std::pow(double(k), -s);

  // Tail sum_{k>=N} k^-s = N^{1-s}/(s-1) + N^-s/2
  //   + sum_j B_2j/(2j)! s(s+1)...(s+2j-2) N^{-s-2j+1} + R.
  double tail = std::pow(n, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(n, -s);
  double rising = s;  // s (s+1) ... (s + 2j - 2)
  double last = 0.0;
  for (std::size_t j = 1; j <= kBernoulliOverFactorial.size(); ++j) {
    last = kBernoulliOverFactorial[j - 1] * rising * std::pow(n, -s - 2.0 * double(j) + 1.0);
    tail += last;
    rising *= (s + 2.0 * double(j) - 1.0) * (s + 2.0 * double(j));
  }
  // For real s > 1 the remainder is bounded by the first omitted term,
  // itself below the last included one in magnitude once N > s.
  return {sum + tail, std::abs(last) + 4.0 * std::numeric_limits<double>::epsilon() * (sum + tail)};
}

}  // namespace coupconc
