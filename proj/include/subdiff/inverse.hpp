#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subdiff/laplace.hpp"

namespace subdiff {

/// Regularization knobs shared by the reconstruction routines.
struct RegConfig {
  double tikhonov = -1.0;     // < 0: pick the documented default
  double noise_level = 0.0;   // relative data noise; > 0 enables discrepancy
  double tau = 1.1;           // discrepancy factor
  bool enforce_vanishing_tail = true;
  double sigma_floor = 1e-8;  // relative floor on |sigma_hat| per abscissa
};

struct Diagnostics {
  double condition = 0.0;
  double residual = 0.0;
  double regularization = 0.0;
  std::map<std::string, double> extra;
};

struct ReconstructionResult {
  Eigen::VectorXd f_hat;         // space-part reconstruction
  Eigen::VectorXd mode_weights;  // recovered <rho^{-1}f, phi> weights
  TimeSeries sigma_hat;          // time-part reconstruction
  double constant = 0.0;         // proportionality factor test
  double constancy_defect = 0.0;
  bool proportional = false;
  double alpha_rational_distance = 0.0;
  Eigen::VectorXd mode_errors;   // vs attached ground truth (test mode)
  Diagnostics diagnostics;
};

namespace inverse_detail {

/// Fitting abscissae for the flux-data pipeline: z real log-spaced over the
/// observable pole range, plus complex rays shallow enough that p = z^{1/a}
/// keeps a solidly positive real part.
inline std::vector<Complex> data_abscissae_z(double lambda_lo,
                                             double lambda_hi, double alpha,
                                             double p_min, double p_max,
                                             int n_real) {
  const double z_lo = std::max(lambda_lo / 10.0, std::pow(p_min, alpha));
  const double z_hi = std::min(10.0 * lambda_hi, std::pow(p_max, alpha));
  if (!(z_hi > z_lo)) {
    throw data_error("reconstruct: empty admissible abscissa range");
  }
  std::vector<Complex> zs;
  for (int i = 0; i < n_real; ++i) {
    const double t = n_real == 1 ? 0.0 : double(i) / (n_real - 1);
    zs.emplace_back(z_lo * std::pow(z_hi / z_lo, t), 0.0);
  }
  const double ray = alpha * ml_detail::kPi / 8.0;
  const int n_cplx = std::max(2, n_real / 3);
  for (int i = 0; i < n_cplx; ++i) {
    const double t = n_cplx == 1 ? 0.0 : double(i) / (n_cplx - 1);
    const double r = z_lo * std::pow(z_hi / z_lo, t);
    zs.push_back(std::polar(r, ray));
    zs.push_back(std::polar(r, -ray));
  }
  return zs;
}

}  // namespace inverse_detail

/// Step (4) of the space-part pipeline: recover the expansion weights from
/// fitted modal coefficients by inverting the trace pairing on the
/// measurement set.  Simple groups use the weighted least-squares quotient;
/// degenerate groups solve the mult x |Gamma| system (solvable because the
/// eigenfunction traces are linearly independent, which requires at least
/// mult measurement nodes).
inline Eigen::VectorXd recover_mode_weights(const ModalCoefficients& fitted,
                                            const EigenSystem& eig,
                                            const BoundarySubset& gamma,
                                            int n_active) {
  const Eigen::MatrixXd traces = eig.traces_on(gamma);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(eig.n_modes());
  for (int g = 0; g < n_active; ++g) {
    const int c0 = eig.first_column_of_group(g);
    const int mult = eig.multiplicities[static_cast<std::size_t>(g)];
    if (static_cast<int>(gamma.nodes.size()) < mult) {
      throw data_error(
          "recover_mode_weights: fewer measurement nodes than the "
          "multiplicity of group " + std::to_string(g + 1));
    }
    Eigen::MatrixXd A(gamma.nodes.size(), mult);
    for (int k = 0; k < mult; ++k) A.col(k) = traces.col(c0 + k);
    if (A.colwise().norm().minCoeff() < 1e-12) {
      throw data_error(
          "recover_mode_weights: mode group " + std::to_string(g + 1) +
          " has vanishing conormal trace on Gamma (unidentifiable)");
    }
    const Eigen::VectorXd chat = fitted.coeffs.row(g).transpose();
    const Eigen::VectorXd d = A.colPivHouseholderQr().solve(chat);
    for (int k = 0; k < mult; ++k) weights[c0 + k] = d[k];
  }
  return weights;
}

/// Space-part reconstruction from boundary flux with known sigma:
/// (1) sample w_hat(p)/sigma_hat(p) where |sigma_hat| clears the floor,
/// (2) substitute z = p^alpha, (3) fit the pole expansion with the known
/// eigenvalues, (4) invert the trace pairing per eigenvalue group,
/// (5) synthesize f_hat = rho * sum weights*phi.
inline ReconstructionResult reconstruct_space_source(
    const FluxTrace& flux, const TimeSeries& sigma_known,
    const EigenSystem& eig, const DiscreteOperator& op, double alpha,
    int n_active, const RegConfig& reg = {},
    const Eigen::VectorXd* truth_weights = nullptr) {
  if (n_active < 1 || n_active > eig.n_groups()) {
    throw std::invalid_argument("reconstruct_space_source: bad n_active");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("reconstruct_space_source: alpha in (0,1)");
  }
  ReconstructionResult res;

  const double T_max = flux.grid.t_max();
  const double dt = flux.grid.dt;
  const double p_min = std::max(0.3, 8.0 / T_max);
  const double p_max = 0.3 / dt;
  const std::vector<Complex> zs = inverse_detail::data_abscissae_z(
      eig.eigenvalues.front(), eig.eigenvalues[n_active - 1], alpha, p_min,
      p_max, std::max(12, 8 * n_active));

  // sigma_hat at all abscissae, then floor relative to the largest
  std::vector<Complex> sig_hat(zs.size());
  double sig_peak = 0.0;
  std::vector<Complex> ps(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const Complex p = std::exp(std::log(zs[i]) / alpha);
    ps[i] = p;
    sig_hat[i] = laplace_transform(sigma_known, p).value;
    sig_peak = std::max(sig_peak, std::abs(sig_hat[i]));
  }
  if (sig_peak == 0.0) {
    throw data_error("reconstruct_space_source: sigma_hat vanishes at every "
                     "abscissa; data cannot be normalized");
  }

  std::vector<TransferSample> samples;
  double tail_worst = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    if (std::abs(sig_hat[i]) < reg.sigma_floor * sig_peak) continue;
    TransferSample s;
    s.z = zs[i];
    s.values.resize(flux.values.rows());
    for (Eigen::Index r = 0; r < flux.values.rows(); ++r) {
      TimeSeries row{flux.grid, flux.values.row(r).transpose()};
      const LaplaceSample ls = laplace_transform(row, ps[i]);
      s.values[r] = ls.value / sig_hat[i];
      tail_worst = std::max(tail_worst, ls.tail_bound);
    }
    samples.push_back(std::move(s));
  }
  if (samples.size() < static_cast<std::size_t>(2 * n_active)) {
    throw data_error(
        "reconstruct_space_source: sigma_hat below floor at too many "
        "abscissae");
  }

  ResidueOptions ropt;
  if (reg.tikhonov >= 0.0) {
    ropt.ridge = reg.tikhonov;
  } else if (reg.noise_level > 0.0) {
    ropt.ridge = 1e-3 * reg.noise_level;  // refined by discrepancy below
  }
  ModalCoefficients fitted =
      residue_extract(samples, eig.eigenvalues, n_active, ropt);

  if (reg.noise_level > 0.0 && reg.tikhonov < 0.0) {
    // discrepancy principle on the pole-expansion residual
    const double target = reg.tau * reg.noise_level;
    double lo = 1e-10, hi = 1.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = std::sqrt(lo * hi);
      ResidueOptions o2;
      o2.ridge = mid;
      ModalCoefficients trial =
          residue_extract(samples, eig.eigenvalues, n_active, o2);
      // relative residual of the fit
      double num = 0.0, den = 0.0;
      for (const auto& s : samples) {
        Eigen::VectorXcd model = Eigen::VectorXcd::Zero(s.values.size());
        for (int n = 0; n < n_active; ++n) {
          model += (1.0 / (trial.lambdas[static_cast<std::size_t>(n)] + s.z)) *
                   trial.coeffs.row(n).transpose().cast<Complex>();
        }
        num += (model - s.values).squaredNorm();
        den += s.values.squaredNorm();
      }
      const double rel = std::sqrt(num / std::max(den, 5e-305));
      if (rel > target) {
        hi = mid;
      } else {
        lo = mid;
      }
      fitted = trial;
      ropt.ridge = mid;
    }
  }

  // step (4): invert the trace pairing group by group
  res.mode_weights = recover_mode_weights(fitted, eig, flux.boundary, n_active);

  // step (5)
  res.f_hat = Eigen::VectorXd::Zero(eig.modes.rows());
  for (int c = 0; c < eig.n_modes(); ++c) {
    if (res.mode_weights[c] != 0.0) {
      res.f_hat += res.mode_weights[c] * eig.modes.col(c);
    }
  }
  res.f_hat.array() *= op.coeffs().rho.array();

  res.diagnostics.regularization = ropt.ridge;
  res.diagnostics.extra["laplace_tail_worst"] = tail_worst;
  res.diagnostics.extra["n_samples"] = static_cast<double>(samples.size());
  if (truth_weights) {
    const int n = std::min<int>(truth_weights->size(), res.mode_weights.size());
    res.mode_errors.resize(n);
    const double scale = truth_weights->cwiseAbs().maxCoeff();
    for (int c = 0; c < n; ++c) {
      res.mode_errors[c] =
          std::abs(res.mode_weights[c] - (*truth_weights)[c]) /
          std::max(scale, 1e-300);
    }
  }
  return res;
}

/// Per-node admissibility report for single-point measurements.
struct GSetNode {
  int node = -1;
  double x = 0.0, y = 0.0;
  bool g_member = false;
  int witness_k = -1;   // smallest admissible k, -1 if none
  bool j_member = false;
  bool inconclusive = false;  // nonzero traces but alpha(k+1) always integer
  double defect = 0.0;        // series-vs-resolvent agreement at smallest r
  std::vector<double> trace_values;      // k = 0..K_max
  std::vector<double> probe_magnitudes;  // r = 2^-1..2^-8
};

struct GSetReport {
  std::vector<GSetNode> nodes;
  double zero_threshold = 0.0;
  int K_max = 0;
};

/// Evaluate both characterizations of the admissible set: the iterated
/// inverse-power traces (with the non-resonance condition on alpha(k+1))
/// and the paired-resolvent probe at r = 2^-m, m = 1..8; report membership
/// flags and the agreement defect of the two routes.
inline GSetReport compute_gset(const Eigen::VectorXd& f,
                               const EigenSystem& eig,
                               const DiscreteOperator& op, double alpha,
                               int K_max, const BoundarySubset& boundary,
                               double zero_tol) {
  (void)eig;
  if (K_max < 1) throw std::invalid_argument("compute_gset: K_max >= 1");
  if (!(zero_tol > 0.0)) {
    throw std::invalid_argument("compute_gset: zero_tol > 0");
  }
  boundary.validate(op.domain());

  Eigen::VectorXd rho_inv_f = f;
  for (Eigen::Index id = 0; id < f.size(); ++id) {
    rho_inv_f[id] /= op.coeffs().rho[id];
  }
  const double f_norm = op.weighted_norm(f);
  const double threshold = zero_tol * std::max(f_norm, 5e-305);

  GSetReport rep;
  rep.zero_threshold = threshold;
  rep.K_max = K_max;

  // iterated inverse powers: traces of A^{-k-2} rho^{-1} f, k = 0..K_max
  std::vector<Eigen::VectorXd> traces_k;
  Eigen::VectorXd u = apply_inverse_power(op, 2, rho_inv_f);
  traces_k.push_back(conormal_trace(op, u, boundary));
  for (int k = 1; k <= K_max; ++k) {
    u = op.solve(u);
    traces_k.push_back(conormal_trace(op, u, boundary));
  }

  // resolvent probes
  const Complex ei = std::polar(1.0, alpha * ml_detail::kPi);
  std::vector<Eigen::VectorXcd> probes;  // per m, per boundary node
  for (int m = 1; m <= 8; ++m) {
    const double r = std::pow(2.0, -m);
    Eigen::VectorXcd w =
        op.solve_shifted(r / ei, rho_inv_f.cast<Complex>());
    w = op.solve_shifted(r * ei, w);
    Eigen::VectorXd wr(w.size()), wi(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      wr[i] = w[i].real();
      wi[i] = w[i].imag();
    }
    const Eigen::VectorXd tr = conormal_trace(op, wr, boundary);
    const Eigen::VectorXd ti = conormal_trace(op, wi, boundary);
    Eigen::VectorXcd probe(tr.size());
    for (Eigen::Index i = 0; i < tr.size(); ++i) probe[i] = {tr[i], ti[i]};
    probes.push_back(std::move(probe));
  }

  const Complex e2 = ei * ei;  // e^{2 i alpha pi}
  for (std::size_t b = 0; b < boundary.nodes.size(); ++b) {
    GSetNode node;
    node.node = boundary.nodes[b];
    node.x = op.domain().x(node.node);
    node.y = op.domain().y(node.node);
    bool any_nonzero = false;
    for (int k = 0; k <= K_max; ++k) {
      const double v =
          traces_k[static_cast<std::size_t>(k)][static_cast<Eigen::Index>(b)];
      node.trace_values.push_back(v);
      const double resonance =
          std::abs(alpha * (k + 1) - std::round(alpha * (k + 1)));
      const bool eligible = resonance > 1e-9;
      if (std::abs(v) > threshold) {
        any_nonzero = true;
        if (eligible && node.witness_k < 0) {
          node.witness_k = k;
          node.g_member = true;
        }
      }
    }
    node.inconclusive = any_nonzero && !node.g_member;

    for (int m = 0; m < 8; ++m) {
      const double mag =
          std::abs(probes[static_cast<std::size_t>(m)]
                          [static_cast<Eigen::Index>(b)]);
      node.probe_magnitudes.push_back(mag);
      if (mag > threshold) node.j_member = true;
    }

    // series identity at the smallest probe radius:
    // probe(r) = sum_n [(1 - e^{2 i a pi (n+1)})/(1 - e^{2 i a pi})]
    //            e^{-i a pi n} (-1)^n trace_n * r^n
    const double r_small = std::pow(2.0, -8);
    Complex pred(0.0, 0.0);
    Complex phase(1.0, 0.0);  // (-e^{-i a pi})^n
    double rn = 1.0;
    for (int n = 0; n <= K_max; ++n) {
      Complex geom;
      Complex e2n1 = std::pow(e2, n + 1);
      geom = (1.0 - e2n1) / (1.0 - e2);
      pred += geom * phase *
              node.trace_values[static_cast<std::size_t>(n)] * rn;
      phase *= -1.0 / ei;
      rn *= r_small;
    }
    node.defect =
        std::abs(probes[7][static_cast<Eigen::Index>(b)] - pred) /
        std::max(f_norm, 5e-305);
    rep.nodes.push_back(std::move(node));
  }
  return rep;
}

/// Time-part reconstruction from single-point flux with known f: the
/// first-kind Volterra system h = sigma * g discretized by the same exact
/// product quadrature as the forward solver, solved with first-difference
/// Tikhonov regularization.
inline ReconstructionResult reconstruct_time_source(
    const TimeSeries& point_flux, const Eigen::VectorXd& f_known,
    const EigenSystem& eig, const DiscreteOperator& op, int x0_node,
    double alpha, double T, double delta, const RegConfig& reg = {},
    const TimeSeries* truth_sigma = nullptr) {
  point_flux.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("reconstruct_time_source: alpha in (0,1)");
  }
  if (!(delta > 0.0 && delta < T) || T > point_flux.grid.t_max() + 1e-12) {
    throw std::invalid_argument(
        "reconstruct_time_source: need 0 < delta < T <= data window");
  }
  const BoundarySubset x0 = BoundarySubset::single(x0_node);
  x0.validate(op.domain());

  const ModalCoefficients mc = modal_transfer(eig, f_known, x0);
  double kernel_mass = 0.0;
  for (std::size_t g = 0; g < mc.lambdas.size(); ++g) {
    kernel_mass += std::abs(mc.coeffs(static_cast<Eigen::Index>(g), 0)) /
                   mc.lambdas[g];
  }
  if (kernel_mass < 1e-12 * op.weighted_norm(f_known)) {
    throw data_error(
        "reconstruct_time_source: x0 is effectively blind to f (||g|| below "
        "tolerance)");
  }

  const TimeGrid& grid = point_flux.grid;
  const double dt = grid.dt;
  const auto n_T = static_cast<Eigen::Index>(std::llround(T / dt));
  if (std::abs(n_T * dt - T) > 1e-9 * T) {
    throw std::invalid_argument(
        "reconstruct_time_source: T must be a grid node");
  }

  // unknowns: sigma at nodes 0..n_u; the vanishing-tail constraint zeroes
  // everything past T - delta
  Eigen::Index n_u = n_T;
  if (reg.enforce_vanishing_tail) {
    n_u = static_cast<Eigen::Index>(std::floor((T - delta) / dt + 1e-9));
  }

  // h(t_n) = sum_g c_g * [product-quadrature conv of sigma with K_g](t_n)
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n_T + 1, n_u + 1);
  for (std::size_t g = 0; g < mc.lambdas.size(); ++g) {
    const double cg = mc.coeffs(static_cast<Eigen::Index>(g), 0);
    if (cg == 0.0) continue;
    TimeGrid sub{dt, static_cast<std::size_t>(n_T)};
    const auto kt = forward_detail::kernel_tables(alpha, mc.lambdas[g], sub);
    for (Eigen::Index n = 1; n <= n_T; ++n) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index k = n - j;
        const double dm0 = kt.m0[static_cast<std::size_t>(k)] -
                           kt.m0[static_cast<std::size_t>(k - 1)];
        const double dm1 = kt.m1[static_cast<std::size_t>(k)] -
                           kt.m1[static_cast<std::size_t>(k - 1)];
        const double w_lo = dm0 * (1.0 - static_cast<double>(k)) + dm1 / dt;
        const double w_hi = dm0 * static_cast<double>(k) - dm1 / dt;
        if (j <= n_u) G(n, j) += cg * w_lo;
        if (j + 1 <= n_u) G(n, j + 1) += cg * w_hi;
      }
    }
  }

  const Eigen::VectorXd h = point_flux.values.head(n_T + 1);

  // first-difference penalty
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n_u, n_u + 1);
  for (Eigen::Index i = 0; i < n_u; ++i) {
    L(i, i) = -1.0;
    L(i, i + 1) = 1.0;
  }

  const Eigen::MatrixXd GtG = G.transpose() * G;
  const Eigen::MatrixXd LtL = L.transpose() * L;
  const Eigen::VectorXd Gth = G.transpose() * h;

  // ||G||_2 estimate by a few power iterations on G^T G
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n_u + 1).normalized();
  for (int it = 0; it < 30; ++it) v = (GtG * v).normalized();
  const double norm_G = std::sqrt(v.dot(GtG * v));

  auto solve_mu = [&](double mu2) {
    Eigen::MatrixXd M = GtG + mu2 * LtL;
    return Eigen::VectorXd(M.ldlt().solve(Gth));
  };

  double mu2;
  Eigen::VectorXd sigma_u;
  if (reg.tikhonov >= 0.0) {
    mu2 = reg.tikhonov;
    sigma_u = solve_mu(mu2);
  } else if (reg.noise_level > 0.0) {
    // discrepancy principle: ||G sigma - h|| = tau * noise_level * ||h||
    const double target = reg.tau * reg.noise_level * h.norm();
    double lo = 1e-14 * norm_G * norm_G;
    double hi = 1e2 * norm_G * norm_G;
    auto resid = [&](double m2) { return (G * solve_mu(m2) - h).norm(); };
    if (resid(lo) > target || resid(hi) < target) {
      throw regularization_error(
          "reconstruct_time_source: discrepancy principle does not bracket "
          "(residual range [" + std::to_string(resid(lo)) + ", " +
          std::to_string(resid(hi)) + "], target " + std::to_string(target) +
          ")");
    }
    for (int it = 0; it < 60; ++it) {
      const double mid = std::sqrt(lo * hi);
      if (resid(mid) > target) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    mu2 = std::sqrt(lo * hi);
    sigma_u = solve_mu(mu2);
  } else {
    mu2 = 1e-6 * norm_G * norm_G;
    sigma_u = solve_mu(mu2);
  }

  ReconstructionResult res;
  res.sigma_hat.grid = grid;
  res.sigma_hat.values = Eigen::VectorXd::Zero(grid.size());
  res.sigma_hat.values.head(n_u + 1) = sigma_u;
  res.diagnostics.regularization = mu2;
  res.diagnostics.residual = (G * sigma_u - h).norm() / std::max(h.norm(), 5e-305);
  res.diagnostics.extra["norm_G"] = norm_G;

  // advisory check that x0 lies in the admissible measurement set
  const GSetReport gset =
      compute_gset(f_known, eig, op, alpha, 4, x0, 1e-7);
  res.diagnostics.extra["x0_in_gset"] = gset.nodes.front().g_member ? 1.0 : 0.0;

  if (truth_sigma) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i <= n_T; ++i) {
      const double tv = truth_sigma->values[i];
      const double dv = res.sigma_hat.values[i] - tv;
      num += dv * dv;
      den += tv * tv;
    }
    res.diagnostics.extra["rel_l2_error"] =
        std::sqrt(num / std::max(den, 5e-305));
  }
  return res;
}

/// Proportionality-constant test for a pair of time profiles: samples
/// C(z) = sigma2_hat(z)/sigma1_hat(z) on a disc, fits a degree-8 polynomial
/// and reports C(0) plus the constancy defect.  alpha enters only through
/// the reported rational-proximity of the exponent (the factorization
/// argument needs a non-resonant alpha).
inline ReconstructionResult joint_factor_test(const TimeSeries& sigma1,
                                              const TimeSeries& sigma2,
                                              double alpha, double radius,
                                              double defect_tol = 1e-6) {
  sigma1.validate();
  sigma2.validate();
  if (!(radius > 0.0)) {
    throw std::invalid_argument("joint_factor_test: radius > 0");
  }

  std::vector<Complex> zs;
  zs.emplace_back(0.0, 0.0);
  for (double frac : {0.35, 0.7, 1.0}) {
    for (int k = 0; k < 12; ++k) {
      zs.push_back(std::polar(radius * frac,
                              2.0 * ml_detail::kPi * k / 12.0));
    }
  }

  Eigen::VectorXcd C(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const Complex s1 = laplace_transform(sigma1, zs[i]).value;
    const Complex s2 = laplace_transform(sigma2, zs[i]).value;
    if (std::abs(s1) < 1e-14 * std::max(1.0, std::abs(s2))) {
      throw data_error(
          "joint_factor_test: sigma1_hat vanishes on the sample set");
    }
    C[static_cast<Eigen::Index>(i)] = s2 / s1;
  }

  // degree-8 polynomial fit in z
  constexpr int kDeg = 8;
  Eigen::MatrixXcd V(zs.size(), kDeg + 1);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    Complex zp = 1.0;
    for (int d = 0; d <= kDeg; ++d) {
      V(static_cast<Eigen::Index>(i), d) = zp;
      zp *= zs[i] / radius;  // scaled for conditioning
    }
  }
  const Eigen::VectorXcd coef =
      V.colPivHouseholderQr().solve(C);
  const Complex c0 = coef[0];

  ReconstructionResult res;
  res.constant = c0.real();
  double dev = 0.0;
  for (Eigen::Index i = 0; i < C.size(); ++i) {
    dev = std::max(dev, std::abs(C[i] - c0));
  }
  res.constancy_defect = dev / std::max(std::abs(c0), 5e-305);
  res.proportional = res.constancy_defect <= defect_tol;

  // distance of alpha to rationals p/q, q <= 12
  double dist = std::numeric_limits<double>::infinity();
  for (int q = 1; q <= 12; ++q) {
    const double p = std::round(alpha * q);
    dist = std::min(dist, std::abs(alpha - p / q));
  }
  res.alpha_rational_distance = dist;
  res.diagnostics.extra["imag_c0"] = std::abs(c0.imag());
  return res;
}

/// Positivity certificate: for one-signed g and f = rho A^{k1} g, the
/// conormal derivative of w = A^{-2-k2+k1} g must be strictly one-signed on
/// the whole boundary (the constructive content of the "admissible
/// everywhere" case).
struct HopfCertificate {
  BoundarySubset boundary;
  Eigen::VectorXd traces;
  Eigen::VectorXd f;  // rho * A^{k1} g, for reuse downstream
  bool strictly_signed = false;
  int trace_sign = 0;  // +1 when g <= 0, -1 when g >= 0
};

inline HopfCertificate hopf_certificate(const Eigen::VectorXd& g, int k1,
                                        int k2, const DiscreteOperator& op,
                                        double alpha) {
  if (g.size() != op.domain().n_nodes()) {
    throw std::invalid_argument("hopf_certificate: g size mismatch");
  }
  const double gmax = g.maxCoeff();
  const double gmin = g.minCoeff();
  const double scale = std::max(std::abs(gmax), std::abs(gmin));
  if (scale == 0.0) {
    throw std::invalid_argument("hopf_certificate: g vanishes identically");
  }
  const bool nonpos = gmax <= 1e-14 * scale;
  const bool nonneg = gmin >= -1e-14 * scale;
  if (!nonpos && !nonneg) {
    throw std::invalid_argument("hopf_certificate: g changes sign");
  }
  if (k1 < 0 || k2 < k1) {
    throw std::invalid_argument("hopf_certificate: need 0 <= k1 <= k2");
  }
  const double resonance =
      std::abs(alpha * (k2 + 1) - std::round(alpha * (k2 + 1)));
  if (resonance <= 1e-9) {
    throw std::invalid_argument(
        "hopf_certificate: alpha*(k2+1) is (numerically) an integer");
  }

  HopfCertificate cert;
  cert.trace_sign = nonpos ? +1 : -1;

  // f = rho A^{k1} g
  Eigen::VectorXd Ak1g = g;
  for (int i = 0; i < k1; ++i) Ak1g = op.apply(Ak1g);
  cert.f = Ak1g.cwiseProduct(op.coeffs().rho);

  const Eigen::VectorXd w = apply_inverse_power(op, 2 + k2 - k1, g);
  cert.boundary = BoundarySubset::all(op.domain());
  cert.traces = conormal_trace(op, w, cert.boundary);

  cert.strictly_signed = true;
  for (Eigen::Index i = 0; i < cert.traces.size(); ++i) {
    if (!(cert.traces[i] * cert.trace_sign > 0.0)) {
      cert.strictly_signed = false;
      break;
    }
  }
  return cert;
}

}  // namespace subdiff
