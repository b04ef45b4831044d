#pragma once

#include <stdexcept>
#include <string>

namespace coupconc {

// Base class for every error raised by the library. Statistical verdicts
// (FAIL, INCONCLUSIVE) are data, never exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// ---- chain-core -----------------------------------------------------------

class RowSumError : public Error {
 public:
  RowSumError(std::size_t row, double sum)
      : Error("row " + std::to_string(row) + " sums to " + std::to_string(sum)),
        row(row), sum(sum) {}
  std::size_t row;
  double sum;
};

class NegativeEntry : public Error {
 public:
  NegativeEntry(std::size_t row, std::size_t col, double value)
      : Error("entry (" + std::to_string(row) + "," + std::to_string(col) +
              ") is negative or above one: " + std::to_string(value)),
        row(row), col(col), value(value) {}
  std::size_t row;
  std::size_t col;
  double value;
};

class NotErgodic : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class MassTolExceeded : public Error {
 public:
  MassTolExceeded(double mass, double tol)
      : Error("stationary mass above the cap is " + std::to_string(mass) +
              ", tolerance " + std::to_string(tol)),
        mass(mass), tol(tol) {}
  double mass;
  double tol;
};

// ---- coupling -------------------------------------------------------------

class MarginalViolation : public Error {
 public:
  MarginalViolation(std::size_t x, std::size_t y, std::size_t target,
                    int coordinate, double got, double want)
      : Error("marginal " + std::to_string(coordinate) + " violated at (x,y)=(" +
              std::to_string(x) + "," + std::to_string(y) + "), target " +
              std::to_string(target) + ": " + std::to_string(got) + " vs " +
              std::to_string(want)),
        x(x), y(y), target(target), coordinate(coordinate) {}
  std::size_t x;
  std::size_t y;
  std::size_t target;
  int coordinate;
};

class NotCoalescing : public Error {
 public:
  NotCoalescing()
      : Error("coupling is not coalescing: the diagonal is not absorbing") {}
};

class SingularSystem : public Error {
 public:
  using Error::Error;
};

class RemainderTooLarge : public Error {
 public:
  RemainderTooLarge(double remainder, double tol)
      : Error("truncation remainder " + std::to_string(remainder) +
              " exceeds tolerance " + std::to_string(tol)),
        remainder(remainder) {}
  double remainder;
};

// ---- house of cards -------------------------------------------------------

class IndexBeyondCap : public Error {
 public:
  IndexBeyondCap(std::size_t index, std::size_t defined)
      : Error("q index " + std::to_string(index) + " beyond defined range " +
              std::to_string(defined)) {}
};

class ConditionViolated : public Error {
 public:
  using Error::Error;
};

// ---- bounds / verify ------------------------------------------------------

// A constant whose defining series did not converge within the horizon, or
// whose value keeps growing with the truncation cap.
class DivergenceFlag : public Error {
 public:
  DivergenceFlag(const std::string& what, double growth_exponent)
      : Error(what), growth_exponent(growth_exponent) {}
  double growth_exponent;
};

class DominanceViolated : public Error {
 public:
  DominanceViolated(std::size_t u, std::size_t v, std::size_t t)
      : Error("pair (" + std::to_string(u) + "," + std::to_string(v) +
              ") has a heavier tail than the claimed worst pair at t=" +
              std::to_string(t)),
        u(u), v(v), t(t) {}
  std::size_t u;
  std::size_t v;
  std::size_t t;
};

class ThresholdNotMet : public Error {
 public:
  ThresholdNotMet(double eps, double threshold)
      : Error("epsilon " + std::to_string(eps) +
              " is not above the validity threshold " +
              std::to_string(threshold)),
        eps(eps), threshold(threshold) {}
  double eps;
  double threshold;
};

// ---- cli ------------------------------------------------------------------

class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& field, const std::string& what)
      : Error((line ? "line " + std::to_string(line) + ": " : std::string()) +
              (field.empty() ? std::string() : "[" + field + "] ") + what),
        line(line), field(field) {}
  std::size_t line;
  std::string field;
};

}  // namespace coupconc
