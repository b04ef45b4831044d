#pragma once

// Independent reference computations for the tests. Everything here works on
// dense Eigen matrices and plain loops and shares no code with the library
// beyond its input types.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "coupconc/chain.hpp"
#include "coupconc/coupling.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Random row-stochastic matrix; roughly `density` of the entries nonzero,
// with a positive diagonal so the chain is aperiodic, and a cycle 0->1->..->0
// so it is irreducible.
inline MatrixXd random_stochastic(std::size_t n, std::uint64_t seed, double density = 0.6) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd m = MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (u(gen) < density) m(Eigen::Index(i), Eigen::Index(j)) = u(gen);
    m(Eigen::Index(i), Eigen::Index(i)) += 0.1 + u(gen);
    m(Eigen::Index(i), Eigen::Index((i + 1) % n)) += 0.1 + u(gen);
    m.row(Eigen::Index(i)) /= m.row(Eigen::Index(i)).sum();
  }
  return m;
}

// Stationary law by repeated squaring of P.
inline VectorXd stationary_by_powers(const MatrixXd& p) {
  MatrixXd m = p;
  for (int k = 0; k < 60; ++k) {
    m = m * m;
    for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) /= m.row(r).sum();
  }
  return m.row(0).transpose();
}

// The n^2 x n^2 coupling matrix.
inline MatrixXd dense_coupling(const coupconc::CouplingKernel& q) { return q.dense(); }

// E_{x,y} sum_j d(U_j, V_j) for a coalescing coupling: the diagonal is
// absorbing with zero distance, so tau = (I - Q_off)^{-1} d_off.
inline std::vector<double> tau_hat_all_pairs(const coupconc::CouplingKernel& q) {
  const std::size_t n = q.states(), m = n * n;
  std::vector<Eigen::Index> off;
  for (std::size_t i = 0; i < m; ++i)
    if (i / n != i % n) off.push_back(Eigen::Index(i));
  const MatrixXd full = q.dense();
  const Eigen::Index k = Eigen::Index(off.size());
  MatrixXd a = MatrixXd::Identity(k, k);
  VectorXd d(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    d(r) = q.distance(std::size_t(off[std::size_t(r)]));
    for (Eigen::Index c = 0; c < k; ++c) a(r, c) -= full(off[std::size_t(r)], off[std::size_t(c)]);
  }
  const VectorXd sol = a.fullPivLu().solve(d);
  std::vector<double> out(m, 0.0);
  for (Eigen::Index r = 0; r < k; ++r) out[std::size_t(off[std::size_t(r)])] = sol(r);
  return out;
}

// P(T = t), t = 0..horizon, for every starting pair (row-major pair index),
// by dense powers of the coupling matrix restricted to the off-diagonal.
inline std::vector<std::vector<double>> coupling_time_law(const coupconc::CouplingKernel& q,
                                                          std::size_t horizon) {
  const std::size_t n = q.states(), m = n * n;
  MatrixXd off = q.dense();
  for (std::size_t i = 0; i < m; ++i)
    if (i / n == i % n) off.col(Eigen::Index(i)).setZero();
  // survival[i][t] = P(off-diagonal at time t | start i)
  std::vector<std::vector<double>> surv(m, std::vector<double>(horizon + 2, 0.0));
  MatrixXd power = MatrixXd::Identity(Eigen::Index(m), Eigen::Index(m));
  for (std::size_t i = 0; i < m; ++i)
    if (i / n == i % n) power(Eigen::Index(i), Eigen::Index(i)) = 0.0;
  for (std::size_t t = 0; t <= horizon + 1; ++t) {
    const VectorXd s = power.rowwise().sum();
    for (std::size_t i = 0; i < m; ++i) surv[i][t] = s(Eigen::Index(i));
    power = power * off;
  }
  std::vector<std::vector<double>> law(m, std::vector<double>(horizon + 1, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    law[i][0] = 1.0 - surv[i][0];
    for (std::size_t t = 1; t <= horizon; ++t) law[i][t] = surv[i][t - 1] - surv[i][t];
  }
  return law;
}

inline std::vector<double> expect_over_law(const std::vector<std::vector<double>>& law,
                                           const std::function<double(double)>& g) {
  std::vector<double> out(law.size(), 0.0);
  for (std::size_t i = 0; i < law.size(); ++i)
    for (std::size_t t = 0; t < law[i].size(); ++t) out[i] += law[i][t] * g(double(t));
  return out;
}

// sum_x nu(x) sum_{z,y,u} p(x,z) p(x,y) p(x,u) tau(z,y) tau(z,u), literally.
inline double variance_constant_fourfold(const MatrixXd& p, const VectorXd& nu,
                                         const std::vector<double>& tau) {
  const Eigen::Index n = p.rows();
  double c = 0.0;
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index z = 0; z < n; ++z)
      for (Eigen::Index y = 0; y < n; ++y)
        for (Eigen::Index u = 0; u < n; ++u)
          c += nu(x) * p(x, z) * p(x, y) * p(x, u) * tau[std::size_t(z * n + y)] *
               tau[std::size_t(z * n + u)];
  return c;
}

// The moment constant summed over full tuples (x, y, z_1..z_2p): the 2p-th
// power of the z-average is expanded into a 2p-fold product.
inline double moment_constant_tuples(const MatrixXd& p, const VectorXd& nu,
                                     const std::vector<double>& inner, int order, double zeta) {
  const Eigen::Index n = p.rows();
  const int k = 2 * order;
  double total = 0.0;
  std::vector<Eigen::Index> z(std::size_t(k), 0);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      const double w = nu(x) * p(x, y);
      if (w == 0.0) continue;
      std::fill(z.begin(), z.end(), 0);
      while (true) {
        double term = w;
        for (int j = 0; j < k; ++j) term *= p(x, z[std::size_t(j)]) * inner[std::size_t(y * n + z[std::size_t(j)])];
        total += term;
        int j = 0;
        while (j < k && ++z[std::size_t(j)] == n) z[std::size_t(j++)] = 0;
        if (j == k) break;
      }
    }
  }
  return std::pow(2.0 * order - 1.0, 2.0 * order) * std::pow(zeta / 2.0, order) * total;
}

inline coupconc::TransitionKernel to_kernel(const MatrixXd& p) { return coupconc::validate_kernel(p); }

}  // namespace oracle
