#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "subdiff/errors.hpp"

namespace subdiff {

/// Interval (1D) or axis-aligned rectangle (2D) with a uniform node grid.
/// `nx`/`ny` count nodes per axis, boundary nodes included.
struct DomainSpec {
  int dimension = 1;
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
  int nx = 65;
  int ny = 0;

  void validate() const {
    if (dimension != 1 && dimension != 2) {
      throw std::invalid_argument("DomainSpec: dimension must be 1 or 2");
    }
    if (!(x_max > x_min) || nx < 16) {
      throw std::invalid_argument(
          "DomainSpec: need x_max > x_min and nx >= 16");
    }
    if (dimension == 2 && (!(y_max > y_min) || ny < 16)) {
      throw std::invalid_argument(
          "DomainSpec: need y_max > y_min and ny >= 16");
    }
  }

  int n_nodes() const { return dimension == 1 ? nx : nx * ny; }
  double hx() const { return (x_max - x_min) / (nx - 1); }
  double hy() const { return dimension == 2 ? (y_max - y_min) / (ny - 1) : 0.0; }

  int node_id(int i, int j = 0) const { return dimension == 1 ? i : j * nx + i; }
  int ix(int id) const { return dimension == 1 ? id : id % nx; }
  int iy(int id) const { return dimension == 1 ? 0 : id / nx; }
  double x(int id) const { return x_min + hx() * ix(id); }
  double y(int id) const { return dimension == 2 ? y_min + hy() * iy(id) : 0.0; }

  bool is_boundary(int id) const {
    const int i = ix(id);
    if (dimension == 1) return i == 0 || i == nx - 1;
    const int j = iy(id);
    return i == 0 || i == nx - 1 || j == 0 || j == ny - 1;
  }

  bool is_corner(int id) const {
    if (dimension == 1) return false;
    const int i = ix(id), j = iy(id);
    return (i == 0 || i == nx - 1) && (j == 0 || j == ny - 1);
  }

  /// Trapezoidal quadrature weight of a node.
  double quad_weight(int id) const {
    const int i = ix(id);
    double w = (i == 0 || i == nx - 1) ? 0.5 * hx() : hx();
    if (dimension == 2) {
      const int j = iy(id);
      w *= (j == 0 || j == ny - 1) ? 0.5 * hy() : hy();
    }
    return w;
  }
};

/// Node samples of the diffusion tensor a, potential q and weight rho.
/// 1D uses a11 only.  The 5-point scheme carries no mixed-derivative
/// stencil, so a12 must vanish in 2D.
struct CoefficientField {
  Eigen::VectorXd a11, a22, a12, q, rho;

  static CoefficientField constant(const DomainSpec& dom, double a = 1.0,
                                   double q_val = 0.0, double rho_val = 1.0) {
    CoefficientField cf;
    const int n = dom.n_nodes();
    cf.a11 = Eigen::VectorXd::Constant(n, a);
    cf.q = Eigen::VectorXd::Constant(n, q_val);
    cf.rho = Eigen::VectorXd::Constant(n, rho_val);
    if (dom.dimension == 2) {
      cf.a22 = Eigen::VectorXd::Constant(n, a);
      cf.a12 = Eigen::VectorXd::Zero(n);
    }
    return cf;
  }

  template <class FA, class FQ, class FR>
  static CoefficientField from_functions(const DomainSpec& dom, FA&& fa,
                                         FQ&& fq, FR&& frho) {
    CoefficientField cf;
    const int n = dom.n_nodes();
    cf.a11.resize(n);
    cf.q.resize(n);
    cf.rho.resize(n);
    if (dom.dimension == 2) {
      cf.a22.resize(n);
      cf.a12 = Eigen::VectorXd::Zero(n);
    }
    for (int id = 0; id < n; ++id) {
      const double xv = dom.x(id), yv = dom.y(id);
      cf.a11[id] = fa(xv, yv);
      if (dom.dimension == 2) cf.a22[id] = fa(xv, yv);
      cf.q[id] = fq(xv, yv);
      cf.rho[id] = frho(xv, yv);
    }
    return cf;
  }
};

/// Subset of boundary nodes (the measurement set Gamma, or a single point).
struct BoundarySubset {
  std::vector<int> nodes;

  void validate(const DomainSpec& dom) const {
    if (nodes.empty()) {
      throw std::invalid_argument("BoundarySubset: empty");
    }
    for (int id : nodes) {
      if (id < 0 || id >= dom.n_nodes() || !dom.is_boundary(id)) {
        throw std::invalid_argument("BoundarySubset: node " +
                                    std::to_string(id) +
                                    " is not a boundary node");
      }
    }
  }

  static BoundarySubset single(int node) { return {{node}}; }

  static BoundarySubset left(const DomainSpec& dom) {
    BoundarySubset b;
    if (dom.dimension == 1) {
      b.nodes = {0};
    } else {
      for (int j = 1; j < dom.ny - 1; ++j) b.nodes.push_back(dom.node_id(0, j));
    }
    return b;
  }

  static BoundarySubset right(const DomainSpec& dom) {
    BoundarySubset b;
    if (dom.dimension == 1) {
      b.nodes = {dom.nx - 1};
    } else {
      for (int j = 1; j < dom.ny - 1; ++j)
        b.nodes.push_back(dom.node_id(dom.nx - 1, j));
    }
    return b;
  }

  /// Every boundary node; 2D corners are excluded (no outward normal).
  static BoundarySubset all(const DomainSpec& dom) {
    BoundarySubset b;
    for (int id = 0; id < dom.n_nodes(); ++id) {
      if (dom.is_boundary(id) && !dom.is_corner(id)) b.nodes.push_back(id);
    }
    return b;
  }
};

/// Conservative finite-difference discretization of A = rho^{-1} * (-div(a
/// grad) + q) with homogeneous Dirichlet conditions, kept in the symmetric
/// generalized form  K u = lambda * diag(rho) u  on interior nodes.
class DiscreteOperator {
 public:
  DiscreteOperator(DomainSpec dom, CoefficientField cf)
      : dom_(std::move(dom)), cf_(std::move(cf)) {
    dom_.validate();
    check_coefficients();
    index_nodes();
    assemble_stiffness();
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    ldlt_->compute(K_);
    if (ldlt_->info() != Eigen::Success) {
      throw numeric_error("DiscreteOperator: LDLT factorization failed");
    }
  }

  const DomainSpec& domain() const { return dom_; }
  const CoefficientField& coeffs() const { return cf_; }
  int n_interior() const { return static_cast<int>(interior_.size()); }
  const std::vector<int>& interior_nodes() const { return interior_; }
  const Eigen::SparseMatrix<double>& stiffness() const { return K_; }

  /// Smallest nodewise eigenvalue of a(x); positive by the ellipticity check.
  double ellipticity_constant() const { return ellipticity_; }

  Eigen::VectorXd restrict_interior(const Eigen::VectorXd& full) const {
    Eigen::VectorXd v(n_interior());
    for (int k = 0; k < n_interior(); ++k) v[k] = full[interior_[k]];
    return v;
  }

  Eigen::VectorXd extend_full(const Eigen::VectorXd& interior) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(dom_.n_nodes());
    for (int k = 0; k < n_interior(); ++k) full[interior_[k]] = interior[k];
    return full;
  }

  /// A u = rho^{-1} * (stencil u) on a full-grid Dirichlet vector.
  Eigen::VectorXd apply(const Eigen::VectorXd& full) const {
    check_size(full);
    Eigen::VectorXd ki = K_ * restrict_interior(full);
    for (int k = 0; k < n_interior(); ++k) ki[k] /= cf_.rho[interior_[k]];
    return extend_full(ki);
  }

  /// A^{-1} g: solve (stencil u) = rho * g, zero Dirichlet data.
  Eigen::VectorXd solve(const Eigen::VectorXd& g_full) const {
    check_size(g_full);
    Eigen::VectorXd rhs(n_interior());
    for (int k = 0; k < n_interior(); ++k) {
      rhs[k] = cf_.rho[interior_[k]] * g_full[interior_[k]];
    }
    Eigen::VectorXd u = ldlt_->solve(rhs);
    if (ldlt_->info() != Eigen::Success) {
      throw numeric_error("DiscreteOperator::solve: backsolve failed");
    }
    return extend_full(u);
  }

  /// (A + shift)^{-1} g for complex shift, via (stencil + shift*rho) u = rho*g.
  Eigen::VectorXcd solve_shifted(std::complex<double> shift,
                                 const Eigen::VectorXcd& g_full) const {
    if (g_full.size() != dom_.n_nodes()) {
      throw std::invalid_argument("solve_shifted: size mismatch");
    }
    Eigen::SparseMatrix<std::complex<double>> Kc =
        K_.cast<std::complex<double>>();
    for (int k = 0; k < n_interior(); ++k) {
      Kc.coeffRef(k, k) += shift * cf_.rho[interior_[k]];
    }
    Eigen::SparseLU<Eigen::SparseMatrix<std::complex<double>>> lu;
    lu.compute(Kc);
    if (lu.info() != Eigen::Success) {
      throw numeric_error("solve_shifted: LU factorization failed");
    }
    Eigen::VectorXcd rhs(n_interior());
    for (int k = 0; k < n_interior(); ++k) {
      rhs[k] = cf_.rho[interior_[k]] * g_full[interior_[k]];
    }
    Eigen::VectorXcd u = lu.solve(rhs);
    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(dom_.n_nodes());
    for (int k = 0; k < n_interior(); ++k) full[interior_[k]] = u[k];
    return full;
  }

  /// Quadrature of u*v*rho over the domain (trapezoidal weights).
  double weighted_inner(const Eigen::VectorXd& u,
                        const Eigen::VectorXd& v) const {
    check_size(u);
    if (u.size() != v.size()) {
      throw std::invalid_argument("weighted_inner: shape mismatch");
    }
    double acc = 0.0;
    for (int id = 0; id < dom_.n_nodes(); ++id) {
      acc += u[id] * v[id] * cf_.rho[id] * dom_.quad_weight(id);
    }
    return acc;
  }

  double weighted_norm(const Eigen::VectorXd& u) const {
    return std::sqrt(std::max(0.0, weighted_inner(u, u)));
  }

 private:
  void check_size(const Eigen::VectorXd& v) const {
    if (v.size() != dom_.n_nodes()) {
      throw std::invalid_argument("DiscreteOperator: full-grid size mismatch");
    }
  }

  void check_coefficients() {
    const int n = dom_.n_nodes();
    const bool two_d = dom_.dimension == 2;
    if (cf_.a11.size() != n || cf_.q.size() != n || cf_.rho.size() != n ||
        (two_d && (cf_.a22.size() != n || cf_.a12.size() != n))) {
      throw std::invalid_argument("CoefficientField: sample size mismatch");
    }
    double amax = 0.0;
    ellipticity_ = std::numeric_limits<double>::infinity();
    for (int id = 0; id < n; ++id) {
      double lambda_min = cf_.a11[id];
      if (two_d) {
        const double tr = 0.5 * (cf_.a11[id] + cf_.a22[id]);
        const double det =
            std::sqrt(0.25 * (cf_.a11[id] - cf_.a22[id]) *
                          (cf_.a11[id] - cf_.a22[id]) +
                      cf_.a12[id] * cf_.a12[id]);
        lambda_min = tr - det;
        amax = std::max({amax, cf_.a11[id], cf_.a22[id]});
      } else {
        amax = std::max(amax, cf_.a11[id]);
      }
      if (!(lambda_min > 0.0)) {
        throw coefficient_error(
            "ellipticity violated at node " + std::to_string(id) +
            " (x=" + std::to_string(dom_.x(id)) +
            (two_d ? ", y=" + std::to_string(dom_.y(id)) : "") + ")");
      }
      ellipticity_ = std::min(ellipticity_, lambda_min);
      if (cf_.q[id] < 0.0) {
        throw coefficient_error("q negative at node " + std::to_string(id));
      }
      if (!(cf_.rho[id] > 0.0) || !std::isfinite(cf_.rho[id])) {
        throw coefficient_error("rho out of range at node " +
                                std::to_string(id));
      }
    }
    if (two_d && cf_.a12.cwiseAbs().maxCoeff() > 1e-14 * amax) {
      throw coefficient_error(
          "off-diagonal diffusion coefficients are not representable by the "
          "5-point scheme");
    }
  }

  void index_nodes() {
    full_to_interior_.assign(dom_.n_nodes(), -1);
    for (int id = 0; id < dom_.n_nodes(); ++id) {
      if (!dom_.is_boundary(id)) {
        full_to_interior_[id] = static_cast<int>(interior_.size());
        interior_.push_back(id);
      }
    }
  }

  static double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

  void assemble_stiffness() {
    const int m = n_interior();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m) * 5);
    const double ihx2 = 1.0 / (dom_.hx() * dom_.hx());
    const double ihy2 =
        dom_.dimension == 2 ? 1.0 / (dom_.hy() * dom_.hy()) : 0.0;
    for (int k = 0; k < m; ++k) {
      const int id = interior_[k];
      const int i = dom_.ix(id), j = dom_.iy(id);
      double diag = cf_.q[id];
      auto couple = [&](int nb_id, double flux_coef) {
        diag += flux_coef;
        const int nb = full_to_interior_[nb_id];
        if (nb >= 0) trip.emplace_back(k, nb, -flux_coef);
      };
      couple(dom_.node_id(i - 1, j),
             harmonic(cf_.a11[id], cf_.a11[dom_.node_id(i - 1, j)]) * ihx2);
      couple(dom_.node_id(i + 1, j),
             harmonic(cf_.a11[id], cf_.a11[dom_.node_id(i + 1, j)]) * ihx2);
      if (dom_.dimension == 2) {
        couple(dom_.node_id(i, j - 1),
               harmonic(cf_.a22[id], cf_.a22[dom_.node_id(i, j - 1)]) * ihy2);
        couple(dom_.node_id(i, j + 1),
               harmonic(cf_.a22[id], cf_.a22[dom_.node_id(i, j + 1)]) * ihy2);
      }
      trip.emplace_back(k, k, diag);
    }
    K_.resize(m, m);
    K_.setFromTriplets(trip.begin(), trip.end());
    K_.makeCompressed();
  }

  DomainSpec dom_;
  CoefficientField cf_;
  Eigen::SparseMatrix<double> K_;
  std::vector<int> interior_;
  std::vector<int> full_to_interior_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
  double ellipticity_ = 0.0;
};

inline DiscreteOperator assemble(const DomainSpec& dom,
                                 const CoefficientField& cf) {
  return DiscreteOperator(dom, cf);
}

/// Conormal trace sum_ij a_ij d_j(field) nu_i at the requested boundary
/// nodes, one-sided second-order differences.  Assumes the field satisfies
/// the Dirichlet condition.
inline Eigen::VectorXd conormal_trace(const DiscreteOperator& op,
                                      const Eigen::VectorXd& field,
                                      const BoundarySubset& boundary) {
  const DomainSpec& dom = op.domain();
  boundary.validate(dom);
  if (field.size() != dom.n_nodes()) {
    throw std::invalid_argument("conormal_trace: size mismatch");
  }
  const CoefficientField& cf = op.coeffs();
  Eigen::VectorXd out(boundary.nodes.size());
  for (std::size_t k = 0; k < boundary.nodes.size(); ++k) {
    const int id = boundary.nodes[k];
    const int i = dom.ix(id), j = dom.iy(id);
    double trace;
    if (i == 0) {
      // outward normal (-1, 0): -a11 * du/dx, one-sided into the domain
      trace = -cf.a11[id] *
              (4.0 * field[dom.node_id(1, j)] - field[dom.node_id(2, j)]) /
              (2.0 * dom.hx());
    } else if (i == dom.nx - 1) {
      trace = cf.a11[id] *
              (field[dom.node_id(dom.nx - 3, j)] -
               4.0 * field[dom.node_id(dom.nx - 2, j)]) /
              (2.0 * dom.hx());
    } else if (j == 0) {
      trace = -cf.a22[id] *
              (4.0 * field[dom.node_id(i, 1)] - field[dom.node_id(i, 2)]) /
              (2.0 * dom.hy());
    } else {
      trace = cf.a22[id] *
              (field[dom.node_id(i, dom.ny - 3)] -
               4.0 * field[dom.node_id(i, dom.ny - 2)]) /
              (2.0 * dom.hy());
    }
    out[static_cast<Eigen::Index>(k)] = trace;
  }
  return out;
}

/// A^{-k} g by k successive Dirichlet solves.
inline Eigen::VectorXd apply_inverse_power(const DiscreteOperator& op, int k,
                                           const Eigen::VectorXd& g) {
  if (k < 1) throw std::invalid_argument("apply_inverse_power: k >= 1");
  Eigen::VectorXd u = g;
  for (int i = 0; i < k; ++i) u = op.solve(u);
  return u;
}

/// Eigensystem of A = rho^{-1} * stencil: distinct eigenvalues lambda_n in
/// ascending order with multiplicities, rho-orthonormal eigenvectors on the
/// full grid (group-ordered columns), and their conormal traces on all
/// boundary nodes.
struct EigenSystem {
  std::vector<double> eigenvalues;    // one entry per group
  std::vector<int> multiplicities;    // same length
  std::vector<int> group_of_column;   // per mode column
  Eigen::MatrixXd modes;              // full grid x n_modes
  BoundarySubset trace_nodes;         // all boundary nodes (no corners)
  Eigen::MatrixXd traces;             // trace_nodes x n_modes
  Eigen::VectorXd inner_weight;       // rho_i * quad_i, full grid
  Eigen::VectorXd quad_weight;        // quad_i, full grid

  int n_modes() const { return static_cast<int>(modes.cols()); }
  int n_groups() const { return static_cast<int>(eigenvalues.size()); }

  double lambda_of_column(int c) const {
    return eigenvalues[static_cast<std::size_t>(group_of_column[c])];
  }

  int first_column_of_group(int g) const {
    int c = 0;
    for (int gg = 0; gg < g; ++gg) c += multiplicities[gg];
    return c;
  }

  /// <g, phi_c> in the rho-weighted inner product.
  double coefficient(const Eigen::VectorXd& g, int column) const {
    return (g.array() * modes.col(column).array() * inner_weight.array())
        .sum();
  }

  /// Traces restricted to a measurement subset.
  Eigen::MatrixXd traces_on(const BoundarySubset& gamma) const {
    Eigen::MatrixXd out(gamma.nodes.size(), modes.cols());
    for (std::size_t r = 0; r < gamma.nodes.size(); ++r) {
      bool found = false;
      for (std::size_t t = 0; t < trace_nodes.nodes.size(); ++t) {
        if (trace_nodes.nodes[t] == gamma.nodes[r]) {
          out.row(static_cast<Eigen::Index>(r)) =
              traces.row(static_cast<Eigen::Index>(t));
          found = true;
          break;
        }
      }
      if (!found) {
        throw std::invalid_argument(
            "traces_on: node " + std::to_string(gamma.nodes[r]) +
            " has no precomputed trace (corner?)");
      }
    }
    return out;
  }
};

/// Lowest n_modes eigenpairs of the symmetric generalized problem.
/// Eigenvalues closer than mult_tol (relative; default 1e-6) are grouped
/// into one lambda_n with multiplicity, and a group is never split at the
/// truncation boundary.
inline EigenSystem eigensystem(const DiscreteOperator& op, int n_modes,
                               double mult_tol = 1e-6) {
  const int m = op.n_interior();
  if (n_modes < 1 || n_modes > m) {
    throw std::invalid_argument("eigensystem: n_modes out of range");
  }
  const DomainSpec& dom = op.domain();
  const CoefficientField& cf = op.coeffs();

  Eigen::VectorXd inv_sqrt_rho(m);
  for (int k = 0; k < m; ++k) {
    inv_sqrt_rho[k] = 1.0 / std::sqrt(cf.rho[op.interior_nodes()[k]]);
  }
  Eigen::MatrixXd B = Eigen::MatrixXd(op.stiffness());
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      B(r, c) *= inv_sqrt_rho[r] * inv_sqrt_rho[c];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(B);
  if (solver.info() != Eigen::Success) {
    throw numeric_error("eigensystem: eigensolver failed to converge");
  }

  // never truncate inside a near-degenerate group
  int keep = n_modes;
  while (keep < m &&
         solver.eigenvalues()[keep] - solver.eigenvalues()[keep - 1] <=
             mult_tol * std::abs(solver.eigenvalues()[keep])) {
    ++keep;
  }

  EigenSystem es;
  es.modes.resize(dom.n_nodes(), keep);
  const double cell = dom.dimension == 1 ? dom.hx() : dom.hx() * dom.hy();
  const double inv_sqrt_cell = 1.0 / std::sqrt(cell);
  for (int c = 0; c < keep; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(c);
    for (int k = 0; k < m; ++k) v[k] *= inv_sqrt_rho[k] * inv_sqrt_cell;
    Eigen::VectorXd full = op.extend_full(v);
    // fix a deterministic sign: first nonzero-significant entry positive
    for (int id = 0; id < full.size(); ++id) {
      if (std::abs(full[id]) > 1e-12 * full.cwiseAbs().maxCoeff()) {
        if (full[id] < 0.0) full = -full;
        break;
      }
    }
    es.modes.col(c) = full;
    const double lam = solver.eigenvalues()[c];
    if (es.eigenvalues.empty() ||
        lam - es.eigenvalues.back() > mult_tol * std::abs(lam)) {
      es.eigenvalues.push_back(lam);
      es.multiplicities.push_back(1);
    } else {
      ++es.multiplicities.back();
    }
    es.group_of_column.push_back(static_cast<int>(es.eigenvalues.size()) - 1);
  }

  es.inner_weight.resize(dom.n_nodes());
  es.quad_weight.resize(dom.n_nodes());
  for (int id = 0; id < dom.n_nodes(); ++id) {
    es.quad_weight[id] = dom.quad_weight(id);
    es.inner_weight[id] = cf.rho[id] * es.quad_weight[id];
  }
  es.trace_nodes = BoundarySubset::all(dom);
  es.traces.resize(es.trace_nodes.nodes.size(), keep);
  for (int c = 0; c < keep; ++c) {
    es.traces.col(c) = conormal_trace(op, es.modes.col(c), es.trace_nodes);
  }
  return es;
}

/// Expansion weights of rho^{-1} f over the retained modes,
/// d_c = <rho^{-1} f, phi_c>_rho = integral f phi_c dx, together with the
/// relative L2(rho^{-1}) mass left outside the truncation.
struct SourceWeights {
  Eigen::VectorXd weights;
  double tail_fraction = 0.0;
};

inline SourceWeights source_mode_weights(const EigenSystem& eig,
                                         const Eigen::VectorXd& f) {
  if (f.size() != eig.modes.rows()) {
    throw std::invalid_argument("source_mode_weights: f size mismatch");
  }
  SourceWeights sw;
  sw.weights.resize(eig.n_modes());
  double captured = 0.0;
  double total = 0.0;
  for (Eigen::Index id = 0; id < f.size(); ++id) {
    // f^2 / rho * w  ==  f^2 * w^2 / (rho * w)
    if (eig.inner_weight[id] > 0.0) {
      total += f[id] * f[id] * eig.quad_weight[id] * eig.quad_weight[id] /
               eig.inner_weight[id];
    }
  }
  for (int c = 0; c < eig.n_modes(); ++c) {
    const double d =
        (f.array() * eig.modes.col(c).array() * eig.quad_weight.array()).sum();
    sw.weights[c] = d;
    captured += d * d;
  }
  sw.tail_fraction =
      total > 0.0 ? std::sqrt(std::max(0.0, total - captured) / total) : 0.0;
  return sw;
}

/// Truncated D(A^s) norm of g with a reported tail estimate.  Throws a
/// truncation_error when the estimated tail exceeds 10% of the partial sum.
inline double fractional_norm(const Eigen::VectorXd& g, double s,
                              const EigenSystem& eig,
                              double* tail_estimate = nullptr) {
  if (s < 0.0) throw std::invalid_argument("fractional_norm: s >= 0 required");
  double partial = 0.0;
  double captured = 0.0;
  for (int c = 0; c < eig.n_modes(); ++c) {
    const double d = eig.coefficient(g, c);
    partial += d * d * std::pow(eig.lambda_of_column(c), 2.0 * s);
    captured += d * d;
  }
  const double total_mass =
      (g.array() * g.array() * eig.inner_weight.array()).sum();
  const double lambda_max = eig.eigenvalues.back();
  const double tail =
      std::max(0.0, total_mass - captured) * std::pow(lambda_max, 2.0 * s);
  if (tail_estimate) *tail_estimate = std::sqrt(tail);
  if (std::sqrt(tail) > 0.1 * std::sqrt(std::max(partial, 0.0))) {
    throw truncation_error(
        "fractional_norm: spectral tail exceeds 10% of the partial sum",
        std::sqrt(tail));
  }
  return std::sqrt(partial);
}

}  // namespace subdiff
