#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "subdiff/time_grid.hpp"

namespace subdiff {

/// Riemann-Liouville integral of order beta in (0,1) by product-trapezoidal
/// quadrature: the kernel (t-u)^{beta-1} is integrated exactly against the
/// piecewise-linear interpolant of h.  Second-order accurate for smooth h.
inline TimeSeries rl_integral(double beta, const TimeSeries& h) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("rl_integral: beta must lie in (0, 1)");
  }
  h.validate();
  const std::size_t n_steps = h.grid.n_steps;
  const double dt = h.grid.dt;

  // P(k) = integral of u^(b-1) over [(k-1)dt, k dt], Q(k) same for u^b
  std::vector<double> kb(n_steps + 1), kb1(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) {
    kb[k] = std::pow(static_cast<double>(k), beta);
    kb1[k] = std::pow(static_cast<double>(k), beta + 1.0);
  }
  const double cb = std::pow(dt, beta) / beta;
  const double cb1 = std::pow(dt, beta + 1.0) / (beta + 1.0);

  TimeSeries out;
  out.grid = h.grid;
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_steps + 1));
  const double inv_gamma = 1.0 / std::tgamma(beta);
  for (std::size_t n = 1; n <= n_steps; ++n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = n - j;
      const double P = cb * (kb[k] - kb[k - 1]);
      const double Q = cb1 * (kb1[k] - kb1[k - 1]);
      const double w_lo = P * (1.0 - static_cast<double>(k)) + Q / dt;
      const double w_hi = P * static_cast<double>(k) - Q / dt;
      acc += w_lo * h.values[static_cast<Eigen::Index>(j)] +
             w_hi * h.values[static_cast<Eigen::Index>(j + 1)];
    }
    out.values[static_cast<Eigen::Index>(n)] = inv_gamma * acc;
  }
  return out;
}

/// Caputo derivative of order alpha in (0,1) by the L1 scheme,
/// O(dt^(2-alpha)) for smooth h.  Annihilates constants exactly.
inline TimeSeries caputo_l1(double alpha, const TimeSeries& h) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("caputo_l1: alpha must lie in (0, 1)");
  }
  h.validate();
  if (h.values.size() < 2) {
    throw std::invalid_argument("caputo_l1: need at least two samples");
  }
  const std::size_t n_steps = h.grid.n_steps;
  const double dt = h.grid.dt;

  std::vector<double> k1a(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) {
    k1a[k] = std::pow(static_cast<double>(k), 1.0 - alpha);
  }
  const double scale = std::pow(dt, -alpha) / std::tgamma(2.0 - alpha);

  TimeSeries out;
  out.grid = h.grid;
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_steps + 1));
  for (std::size_t n = 1; n <= n_steps; ++n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = n - j;
      acc += (h.values[static_cast<Eigen::Index>(j + 1)] -
              h.values[static_cast<Eigen::Index>(j)]) *
             (k1a[k] - k1a[k - 1]);
    }
    out.values[static_cast<Eigen::Index>(n)] = scale * acc;
  }
  return out;
}

}  // namespace subdiff
