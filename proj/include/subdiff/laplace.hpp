#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "subdiff/elliptic.hpp"
#include "subdiff/forward.hpp"
#include "subdiff/time_grid.hpp"

namespace subdiff {

using Complex = std::complex<double>;

/// One Laplace-domain sample with the quadrature tail bound that was left
/// outside the recorded window.
struct LaplaceSample {
  Complex p{0.0, 0.0};
  Complex value{0.0, 0.0};
  double tail_bound = 0.0;
};

namespace laplace_detail {

/// Composite Simpson over the sample range [0, i_end*dt]; a single
/// trapezoid cell absorbs an odd final interval.
inline Complex simpson(const Eigen::VectorXd& v, double dt, Complex p,
                       Eigen::Index i_end) {
  auto g = [&](Eigen::Index i) {
    return std::exp(-p * (dt * static_cast<double>(i))) * v[i];
  };
  Complex acc(0.0, 0.0);
  Eigen::Index i = 0;
  for (; i + 2 <= i_end; i += 2) {
    acc += (dt / 3.0) * (g(i) + 4.0 * g(i + 1) + g(i + 2));
  }
  if (i + 1 <= i_end) {
    acc += (dt / 2.0) * (g(i) + g(i + 1));
  }
  return acc;
}

}  // namespace laplace_detail

/// Laplace transform of a sampled series.  Traces that end in exact zeros
/// are treated as compactly supported (tail exactly 0, any p admissible);
/// otherwise Re p > 0 is required and the analytic tail bound
/// max|tail| * e^(-Re p * T) / Re p is reported.  Exceeding `tol` raises an
/// accuracy_error.
inline LaplaceSample laplace_transform(
    const TimeSeries& ts, Complex p,
    double tol = std::numeric_limits<double>::infinity()) {
  ts.validate();
  const Eigen::Index n = ts.values.size() - 1;
  Eigen::Index support_end = n;
  while (support_end > 0 && ts.values[support_end] == 0.0) --support_end;

  LaplaceSample out;
  out.p = p;
  if (support_end == 0 && ts.values[0] == 0.0) {
    return out;  // identically zero trace
  }
  const bool compact = support_end < n;
  if (!compact && !(p.real() > 0.0)) {
    throw std::invalid_argument(
        "laplace_transform: Re p > 0 required unless the trace is compactly "
        "supported");
  }
  out.value = laplace_detail::simpson(ts.values, ts.grid.dt, p,
                                      compact ? support_end + 1 : n);
  if (!compact) {
    const double tail_mag =
        ts.values.segment(n - std::min<Eigen::Index>(n, 8),
                          std::min<Eigen::Index>(n, 8) + 1)
            .cwiseAbs()
            .maxCoeff();
    out.tail_bound =
        tail_mag * std::exp(-p.real() * ts.grid.t_max()) / p.real();
  }
  if (out.tail_bound > tol) {
    throw accuracy_error("laplace_transform: tail bound exceeds tolerance",
                         out.tail_bound);
  }
  return out;
}

/// Per-boundary-node transform of a flux trace.
inline std::vector<LaplaceSample> laplace_transform(
    const FluxTrace& flux, Complex p,
    double tol = std::numeric_limits<double>::infinity()) {
  std::vector<LaplaceSample> out;
  out.reserve(flux.boundary.nodes.size());
  for (Eigen::Index r = 0; r < flux.values.rows(); ++r) {
    TimeSeries ts{flux.grid, flux.values.row(r).transpose()};
    out.push_back(laplace_transform(ts, p, tol));
  }
  return out;
}

/// The p-independent numerators of the flux transfer function: per
/// eigenvalue group n, c_n(x) = sum_k <rho^{-1} f, phi_{n,k}> d_nu phi_{n,k}(x)
/// on the measurement nodes.
struct ModalCoefficients {
  std::vector<double> lambdas;
  Eigen::MatrixXd coeffs;  // n_lambdas x |Gamma|
  BoundarySubset boundary;
};

/// Ground-truth modal coefficients straight from inner products and
/// precomputed traces (the oracle side of every reconstruction).
inline ModalCoefficients modal_transfer(const EigenSystem& eig,
                                        const Eigen::VectorXd& f,
                                        const BoundarySubset& gamma) {
  const SourceWeights sw = source_mode_weights(eig, f);
  const Eigen::MatrixXd traces = eig.traces_on(gamma);
  ModalCoefficients mc;
  mc.boundary = gamma;
  mc.lambdas = eig.eigenvalues;
  mc.coeffs =
      Eigen::MatrixXd::Zero(eig.n_groups(), static_cast<Eigen::Index>(
                                                gamma.nodes.size()));
  for (int c = 0; c < eig.n_modes(); ++c) {
    mc.coeffs.row(eig.group_of_column[static_cast<std::size_t>(c)]) +=
        sw.weights[c] * traces.col(c).transpose();
  }
  return mc;
}

/// w_hat(p) = sigma_hat * sum_n c_n(x) / (lambda_n + p^alpha), principal
/// branch, per measurement node.
inline Eigen::VectorXcd transfer_eval(const ModalCoefficients& mc,
                                      Complex sigma_hat, Complex p,
                                      double alpha) {
  if (p.imag() == 0.0 && p.real() <= 0.0) {
    throw branch_error("transfer_eval: p on the closed negative real axis");
  }
  const Complex pa = std::pow(p, alpha);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(mc.coeffs.cols());
  for (std::size_t n = 0; n < mc.lambdas.size(); ++n) {
    const Complex factor = sigma_hat / (mc.lambdas[n] + pa);
    out += factor * mc.coeffs.row(static_cast<Eigen::Index>(n))
                        .transpose()
                        .cast<Complex>();
  }
  return out;
}

/// Discontinuity of w_hat across the negative real axis at p = -R, computed
/// two ways and cross-checked:
///   (a) Richardson limit of transfer_eval along arg p -> +/- pi,
///   (b) closed form sigma_hat(-R) * sum_n c_n * (-2i R^alpha sin(alpha pi))
///       / ((lambda_n + R^alpha e^{i alpha pi})(lambda_n + R^alpha e^{-i alpha pi})).
/// Disagreement beyond `tol` (relative) raises a consistency_error.
inline Eigen::VectorXcd branch_jump(
    const ModalCoefficients& mc,
    const std::function<Complex(Complex)>& sigma_hat_at, double R,
    double alpha, double tol = 1e-8) {
  if (!(R > 0.0) || !(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("branch_jump: need R > 0 and alpha in (0,1)");
  }
  const double Ra = std::pow(R, alpha);
  const Complex ei = std::polar(1.0, alpha * ml_detail::kPi);
  const Complex sig_m = sigma_hat_at(Complex(-R, 0.0));

  // (b) closed form
  Eigen::VectorXcd closed = Eigen::VectorXcd::Zero(mc.coeffs.cols());
  const Complex num(0.0, -2.0 * Ra * std::sin(alpha * ml_detail::kPi));
  for (std::size_t n = 0; n < mc.lambdas.size(); ++n) {
    const Complex den = (mc.lambdas[n] + Ra * ei) * (mc.lambdas[n] + Ra / ei);
    closed += (sig_m * num / den) *
              mc.coeffs.row(static_cast<Eigen::Index>(n))
                  .transpose()
                  .cast<Complex>();
  }

  // (a) two-sided limit, Neville extrapolation in the angle offset
  constexpr int kPts = 4;
  double eta[kPts];
  Eigen::MatrixXcd tbl(kPts, mc.coeffs.cols());
  for (int k = 0; k < kPts; ++k) {
    eta[k] = 4e-3 / std::pow(4.0, k);
    const Complex p_up = std::polar(R, ml_detail::kPi - eta[k]);
    const Complex p_dn = std::polar(R, -(ml_detail::kPi - eta[k]));
    tbl.row(k) = (transfer_eval(mc, sigma_hat_at(p_up), p_up, alpha) -
                  transfer_eval(mc, sigma_hat_at(p_dn), p_dn, alpha))
                     .transpose();
  }
  for (int level = 1; level < kPts; ++level) {
    for (int k = kPts - 1; k >= level; --k) {
      const double w = eta[k] / (eta[k - level] - eta[k]);
      tbl.row(k) = tbl.row(k) + w * (tbl.row(k) - tbl.row(k - 1));
    }
  }
  const Eigen::VectorXcd limit = tbl.row(kPts - 1).transpose();

  const double scale = std::max(closed.norm(), 5e-305);
  const double defect = (limit - closed).norm() / scale;
  if (defect > tol && closed.norm() > 1e-13) {
    throw consistency_error(
        "branch_jump: two-sided limit and closed form disagree (relative "
        "defect " + std::to_string(defect) + ")");
  }
  return closed;
}

/// One sample (z, G(z)) of the pole expansion, values per measurement node.
struct TransferSample {
  Complex z{0.0, 0.0};
  Eigen::VectorXcd values;
};

struct ResidueOptions {
  double ridge = 0.0;        // Tikhonov damping on the coefficients
  double cond_limit = 1e10;  // rejection threshold when ridge == 0
};

/// Recover the modal coefficients from samples of G(z) ~ sum_n c_n/(lambda_n+z)
/// by linear least squares with the known poles.  The numerically robust
/// realization of the residue limit: multiplying out (z + lambda_n) and
/// taking z -> -lambda_n is replaced by a well-posed linear fit.
inline ModalCoefficients residue_extract(
    const std::vector<TransferSample>& samples,
    const std::vector<double>& lambdas, int n_active,
    const ResidueOptions& opt = {}) {
  if (n_active < 1 || static_cast<std::size_t>(n_active) > lambdas.size()) {
    throw std::invalid_argument("residue_extract: n_active out of range");
  }
  const int m = static_cast<int>(samples.size());
  if (m < 2 * n_active) {
    throw std::invalid_argument(
        "residue_extract: need at least 2*n_active samples");
  }
  const Eigen::Index n_nodes = samples.front().values.size();
  for (const auto& s : samples) {
    if (s.values.size() != n_nodes) {
      throw std::invalid_argument("residue_extract: ragged sample values");
    }
  }

  // stacked real system: [Re A; Im A] c = [Re g; Im g], c real
  Eigen::MatrixXd A(2 * m, n_active);
  for (int i = 0; i < m; ++i) {
    for (int n = 0; n < n_active; ++n) {
      const Complex a = 1.0 / (lambdas[static_cast<std::size_t>(n)] +
                               samples[static_cast<std::size_t>(i)].z);
      A(i, n) = a.real();
      A(m + i, n) = a.imag();
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cond =
      svd.singularValues()(0) /
      std::max(svd.singularValues()(svd.singularValues().size() - 1),
               5e-305);
  if (opt.ridge == 0.0 && cond > opt.cond_limit) {
    throw conditioning_error(
        "residue_extract: normal system condition number " +
        std::to_string(cond) +
        " exceeds limit; supply more or better-spread abscissae");
  }

  ModalCoefficients mc;
  mc.lambdas.assign(lambdas.begin(), lambdas.begin() + n_active);
  mc.coeffs.resize(n_active, n_nodes);
  Eigen::VectorXd rhs(2 * m);
  for (Eigen::Index col = 0; col < n_nodes; ++col) {
    for (int i = 0; i < m; ++i) {
      rhs[i] = samples[static_cast<std::size_t>(i)].values[col].real();
      rhs[m + i] = samples[static_cast<std::size_t>(i)].values[col].imag();
    }
    Eigen::VectorXd beta = svd.matrixU().transpose() * rhs;
    Eigen::VectorXd filt(svd.singularValues().size());
    for (Eigen::Index k = 0; k < filt.size(); ++k) {
      const double s = svd.singularValues()(k);
      filt[k] = s * beta[k] / (s * s + opt.ridge * opt.ridge);
    }
    mc.coeffs.col(col) = svd.matrixV() * filt;
  }
  return mc;
}

/// Default fitting abscissae in the z = p^alpha variable: real points
/// log-spaced over [lambda_1/10, 10*lambda_n_active] plus complex points on
/// the rays arg z = +/- pi/4.
inline std::vector<Complex> default_abscissae_z(
    const std::vector<double>& lambdas, int n_active, int n_real = 0) {
  if (n_active < 1 || static_cast<std::size_t>(n_active) > lambdas.size()) {
    throw std::invalid_argument("default_abscissae_z: n_active out of range");
  }
  if (n_real <= 0) n_real = 6 * n_active;
  const double lo = lambdas.front() / 10.0;
  const double hi = 10.0 * lambdas[static_cast<std::size_t>(n_active - 1)];
  std::vector<Complex> zs;
  for (int i = 0; i < n_real; ++i) {
    const double t = n_real == 1 ? 0.0 : double(i) / (n_real - 1);
    zs.emplace_back(lo * std::pow(hi / lo, t), 0.0);
  }
  const int n_cplx = std::max(2, n_real / 3);
  for (int i = 0; i < n_cplx; ++i) {
    const double t = n_cplx == 1 ? 0.0 : double(i) / (n_cplx - 1);
    const double r = lo * std::pow(hi / lo, t);
    zs.push_back(std::polar(r, ml_detail::kPi / 4.0));
    zs.push_back(std::polar(r, -ml_detail::kPi / 4.0));
  }
  return zs;
}

}  // namespace subdiff
