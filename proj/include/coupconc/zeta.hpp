#pragma once

namespace coupconc {

struct ZetaValue {
  double value = 0.0;
  double error_bound = 0.0;
};

/// Riemann zeta for real s > 1: direct sum of the first terms plus the
/// Euler-Maclaurin tail. error_bound bounds the truncated correction series.
/// Throws PreconditionError for s <= 1.
ZetaValue riemann_zeta(double s);

}  // namespace coupconc
