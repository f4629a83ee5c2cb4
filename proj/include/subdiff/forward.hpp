#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "subdiff/elliptic.hpp"
#include "subdiff/mittag_leffler.hpp"
#include "subdiff/time_grid.hpp"

namespace subdiff {

/// Time profile of the source.  Named closed forms are sampled onto the
/// solver grid once; a profile may also be given as explicit samples.
/// All profiles are extended by zero beyond their support.
struct SigmaSpec {
  enum class Kind { Hat, Bump, ConstOn, TwoLevel, Series };

  Kind kind = Kind::Hat;
  double t0 = 0.0, t1 = 0.0;
  double t_mid = 0.0, level2 = 0.0;
  TimeSeries series;

  /// Piecewise-linear 0 -> 1 -> 0 on (a, b), peak in the middle.
  static SigmaSpec hat(double a, double b) {
    SigmaSpec s;
    s.kind = Kind::Hat;
    s.t0 = a;
    s.t1 = b;
    return s;
  }

  /// Smooth compactly supported bump exp(1 - 1/(1-s^2)) on (a, b).
  static SigmaSpec bump(double a, double b) {
    SigmaSpec s;
    s.kind = Kind::Bump;
    s.t0 = a;
    s.t1 = b;
    return s;
  }

  /// Indicator of (a, b).
  static SigmaSpec const_on(double a, double b) {
    SigmaSpec s;
    s.kind = Kind::ConstOn;
    s.t0 = a;
    s.t1 = b;
    return s;
  }

  /// 1 on (a, m), level2 on (m, b).
  static SigmaSpec two_level(double a, double m, double b, double lvl2) {
    SigmaSpec s;
    s.kind = Kind::TwoLevel;
    s.t0 = a;
    s.t_mid = m;
    s.t1 = b;
    s.level2 = lvl2;
    return s;
  }

  static SigmaSpec from_series(TimeSeries ts) {
    SigmaSpec s;
    s.kind = Kind::Series;
    s.series = std::move(ts);
    return s;
  }

  double eval(double t) const {
    switch (kind) {
      case Kind::Hat: {
        if (t <= t0 || t >= t1) return 0.0;
        const double m = 0.5 * (t0 + t1);
        return t <= m ? (t - t0) / (m - t0) : (t1 - t) / (t1 - m);
      }
      case Kind::Bump: {
        if (t <= t0 || t >= t1) return 0.0;
        const double s = 2.0 * (t - t0) / (t1 - t0) - 1.0;
        return std::exp(1.0 - 1.0 / (1.0 - s * s));
      }
      case Kind::ConstOn:
        return (t > t0 && t < t1) ? 1.0 : 0.0;
      case Kind::TwoLevel:
        if (t > t0 && t < t_mid) return 1.0;
        if (t >= t_mid && t < t1) return level2;
        return 0.0;
      case Kind::Series: {
        const TimeGrid& g = series.grid;
        if (t <= 0.0 || t >= g.t_max()) {
          if (t == 0.0) return series.values[0];
          return 0.0;
        }
        const double s = t / g.dt;
        const auto j = static_cast<Eigen::Index>(s);
        const double w = s - static_cast<double>(j);
        return (1.0 - w) * series.values[j] + w * series.values[j + 1];
      }
    }
    return 0.0;
  }

  TimeSeries sample(const TimeGrid& grid) const {
    return sample_series(grid, [this](double t) { return eval(t); });
  }
};

/// Separated-variables source sigma(t) * f(x) with the vanishing-tail
/// condition sigma = 0 on (T - delta, T).
struct SourceSpec {
  Eigen::VectorXd f;
  SigmaSpec sigma;
  double T = 1.0;
  double delta = 0.0;

  void validate() const {
    if (!(delta > 0.0 && delta < T)) {
      throw std::invalid_argument("SourceSpec: need 0 < delta < T");
    }
    // spot-check the vanishing tail on (T - delta, T)
    double peak = 0.0;
    for (int k = 0; k <= 64; ++k) {
      peak = std::max(peak, std::abs(sigma.eval(k * T / 64.0)));
    }
    for (int k = 1; k < 32; ++k) {
      const double t = T - delta + delta * k / 32.0;
      if (std::abs(sigma.eval(t)) > 1e-12 * std::max(peak, 1.0)) {
        throw std::invalid_argument(
            "SourceSpec: sigma does not vanish on (T - delta, T)");
      }
    }
  }
};

/// Snapshots v(., t_j) on the full grid, column per time node.
struct FieldTrajectory {
  TimeGrid grid;
  Eigen::MatrixXd snapshots;
};

/// Conormal flux samples on a boundary subset, row per boundary node.
struct FluxTrace {
  BoundarySubset boundary;
  TimeGrid grid;
  Eigen::MatrixXd values;
};

namespace forward_detail {

/// Tables of the exact kernel primitives on the uniform grid:
///   M0(x) = integral_0^x u^(a-1) E_{a,a}(-lam u^a) du = x^a E_{a,a+1}(-lam x^a)
///   M1(x) = integral_0^x u^a  E-kernel du = x*M0(x) - x^(a+1) E_{a,a+2}(-lam x^a)
struct KernelTables {
  std::vector<double> m0, m1;
};

inline KernelTables kernel_tables(double alpha, double lambda,
                                  const TimeGrid& grid) {
  KernelTables kt;
  const std::size_t n = grid.n_steps;
  kt.m0.assign(n + 1, 0.0);
  kt.m1.assign(n + 1, 0.0);
  const MLParams p1{alpha, alpha + 1.0};
  const MLParams p2{alpha, alpha + 2.0};
  for (std::size_t i = 1; i <= n; ++i) {
    const double x = grid.time(i);
    const double xa = std::pow(x, alpha);
    const double m0 = xa * ml(p1, -lambda * xa);
    kt.m0[i] = m0;
    kt.m1[i] = x * m0 - x * xa * ml(p2, -lambda * xa);
  }
  return kt;
}

/// Duhamel integral I(t_n) = integral_0^{t_n} sigma(t_n - u) K(u) du with
/// piecewise-linear sigma integrated exactly against the weakly singular
/// kernel.  O(n^2) history sum.
inline std::vector<double> modal_duhamel(const KernelTables& kt,
                                         const Eigen::VectorXd& sigma_samples,
                                         const TimeGrid& grid) {
  const std::size_t n_steps = grid.n_steps;
  const double dt = grid.dt;
  std::vector<double> I(n_steps + 1, 0.0);
  for (std::size_t n = 1; n <= n_steps; ++n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = n - j;
      const double s_lo = sigma_samples[static_cast<Eigen::Index>(j)];
      const double s_hi = sigma_samples[static_cast<Eigen::Index>(j + 1)];
      if (s_lo == 0.0 && s_hi == 0.0) continue;
      const double ds = s_hi - s_lo;
      const double A = s_lo + ds * static_cast<double>(k);
      const double B = -ds / dt;
      acc += A * (kt.m0[k] - kt.m0[k - 1]) + B * (kt.m1[k] - kt.m1[k - 1]);
    }
    I[n] = acc;
  }
  return I;
}

}  // namespace forward_detail

/// Spectral Duhamel solution of the forcing problem: per eigenvalue group,
/// the modal response integral is evaluated by product quadrature that is
/// exact for the piecewise-linear sampled sigma.
inline FieldTrajectory spectral_solve(const EigenSystem& eig, double alpha,
                                      const SourceSpec& src,
                                      const TimeGrid& grid,
                                      const DiscreteOperator& op,
                                      double tail_tol = 1e-4) {
  grid.validate();
  src.validate();
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("spectral_solve: alpha must lie in (0, 1]");
  }
  const SourceWeights sw = source_mode_weights(eig, src.f);
  const Eigen::VectorXd& weights = sw.weights;
  if (sw.tail_fraction > tail_tol) {
    throw truncation_error(
        "spectral_solve: spectral tail of rho^{-1} f exceeds tolerance",
        sw.tail_fraction);
  }
  const Eigen::VectorXd sigma = src.sigma.sample(grid).values;

  FieldTrajectory traj;
  traj.grid = grid;
  traj.snapshots = Eigen::MatrixXd::Zero(eig.modes.rows(), grid.size());
  for (int g = 0; g < eig.n_groups(); ++g) {
    const int c0 = eig.first_column_of_group(g);
    const int mult = eig.multiplicities[static_cast<std::size_t>(g)];
    Eigen::VectorXd combined = Eigen::VectorXd::Zero(eig.modes.rows());
    double mass = 0.0;
    for (int c = c0; c < c0 + mult; ++c) {
      combined += weights[c] * eig.modes.col(c);
      mass += std::abs(weights[c]);
    }
    if (mass == 0.0) continue;
    const auto kt = forward_detail::kernel_tables(
        alpha, eig.eigenvalues[static_cast<std::size_t>(g)], grid);
    const auto I = forward_detail::modal_duhamel(kt, sigma, grid);
    for (std::size_t n = 0; n <= grid.n_steps; ++n) {
      if (I[n] != 0.0) {
        traj.snapshots.col(static_cast<Eigen::Index>(n)) += I[n] * combined;
      }
    }
  }
  return traj;
}

/// Implicit L1 time stepping for the same problem; the independent oracle
/// against the spectral route.  Unconditionally stable; O(dt^(2-alpha))
/// in time.  alpha = 1 reduces exactly to backward Euler.
inline FieldTrajectory l1_solve(const DiscreteOperator& op, double alpha,
                                const SourceSpec& src, const TimeGrid& grid) {
  grid.validate();
  src.validate();
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("l1_solve: alpha must lie in (0, 1]");
  }
  const DomainSpec& dom = op.domain();
  if (src.f.size() != dom.n_nodes()) {
    throw std::invalid_argument("l1_solve: f size mismatch");
  }
  const int m = op.n_interior();
  const std::size_t n_steps = grid.n_steps;
  const double dt = grid.dt;
  const double gamma = std::pow(dt, -alpha) / std::tgamma(2.0 - alpha);

  Eigen::SparseMatrix<double> M = op.stiffness();
  Eigen::VectorXd rho_i(m), f_i(m);
  for (int k = 0; k < m; ++k) {
    rho_i[k] = op.coeffs().rho[op.interior_nodes()[k]];
    f_i[k] = src.f[op.interior_nodes()[k]];
  }
  for (int k = 0; k < m; ++k) M.coeffRef(k, k) += gamma * rho_i[k];
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(M);
  if (ldlt.info() != Eigen::Success) {
    throw numeric_error("l1_solve: factorization failed");
  }

  std::vector<double> c(n_steps, 0.0);
  for (std::size_t i = 0; i < n_steps; ++i) {
    c[i] = std::pow(static_cast<double>(i + 1), 1.0 - alpha) -
           std::pow(static_cast<double>(i), 1.0 - alpha);
  }

  const Eigen::VectorXd sigma = src.sigma.sample(grid).values;
  std::vector<Eigen::VectorXd> u(n_steps + 1,
                                 Eigen::VectorXd::Zero(m));
  FieldTrajectory traj;
  traj.grid = grid;
  traj.snapshots = Eigen::MatrixXd::Zero(dom.n_nodes(), grid.size());
  for (std::size_t n = 1; n <= n_steps; ++n) {
    Eigen::VectorXd mem = u[n - 1];
    for (std::size_t i = 1; i < n; ++i) {
      mem -= c[i] * (u[n - i] - u[n - i - 1]);
    }
    Eigen::VectorXd rhs =
        sigma[static_cast<Eigen::Index>(n)] * f_i +
        gamma * rho_i.cwiseProduct(mem);
    if (rhs.isZero(0.0)) {
      u[n].setZero();
    } else {
      u[n] = ldlt.solve(rhs);
      if (ldlt.info() != Eigen::Success) {
        throw numeric_error("l1_solve: backsolve failed at step " +
                            std::to_string(n));
      }
    }
    traj.snapshots.col(static_cast<Eigen::Index>(n)) = op.extend_full(u[n]);
  }
  return traj;
}

/// Conormal flux of a trajectory on a boundary subset, per snapshot.
inline FluxTrace flux_trace(const FieldTrajectory& traj,
                            const DiscreteOperator& op,
                            const BoundarySubset& boundary) {
  boundary.validate(op.domain());
  FluxTrace ft;
  ft.boundary = boundary;
  ft.grid = traj.grid;
  ft.values.resize(boundary.nodes.size(), traj.snapshots.cols());
  for (Eigen::Index j = 0; j < traj.snapshots.cols(); ++j) {
    ft.values.col(j) = conormal_trace(op, traj.snapshots.col(j), boundary);
  }
  return ft;
}

/// Modal-sum flux evaluation for spectral trajectories: the same linear
/// combination assembled from precomputed eigenfunction traces.  Must agree
/// with flux_trace(spectral_solve(...)) to discretization tolerance.
inline FluxTrace flux_trace_modal(const EigenSystem& eig,
                                  const DiscreteOperator& op, double alpha,
                                  const SourceSpec& src, const TimeGrid& grid,
                                  const BoundarySubset& boundary,
                                  double tail_tol = 1e-4) {
  boundary.validate(op.domain());
  const SourceWeights sw = source_mode_weights(eig, src.f);
  const Eigen::VectorXd& weights = sw.weights;
  if (sw.tail_fraction > tail_tol) {
    throw truncation_error(
        "flux_trace_modal: spectral tail of rho^{-1} f exceeds tolerance",
        sw.tail_fraction);
  }
  src.validate();
  const Eigen::VectorXd sigma = src.sigma.sample(grid).values;
  const Eigen::MatrixXd traces = eig.traces_on(boundary);

  FluxTrace ft;
  ft.boundary = boundary;
  ft.grid = grid;
  ft.values = Eigen::MatrixXd::Zero(boundary.nodes.size(), grid.size());
  for (int g = 0; g < eig.n_groups(); ++g) {
    const int c0 = eig.first_column_of_group(g);
    const int mult = eig.multiplicities[static_cast<std::size_t>(g)];
    Eigen::VectorXd tr = Eigen::VectorXd::Zero(boundary.nodes.size());
    double mass = 0.0;
    for (int c = c0; c < c0 + mult; ++c) {
      tr += weights[c] * traces.col(c);
      mass += std::abs(weights[c]);
    }
    if (mass == 0.0) continue;
    const auto kt = forward_detail::kernel_tables(
        alpha, eig.eigenvalues[static_cast<std::size_t>(g)], grid);
    const auto I = forward_detail::modal_duhamel(kt, sigma, grid);
    for (std::size_t n = 0; n <= grid.n_steps; ++n) {
      ft.values.col(static_cast<Eigen::Index>(n)) += I[n] * tr;
    }
  }
  return ft;
}

}  // namespace subdiff
